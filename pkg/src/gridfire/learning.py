"""Tabular Q-learning core: the shared table, its update rule, and policies.

The table update is the standard one-step rule

    Q(s, a) <- Q(s, a) + alpha * (r + gamma * max_a' Q(s', a') - Q(s, a))

with the max taken over the four actions at ``s'`` using pre-update values.
Action selection is either Boltzmann (probability proportional to
``exp(Q / T)``, computed with max-subtraction so low temperatures cannot
overflow) or epsilon-greedy. Both the temperature ``T`` and the learning
rate ``alpha`` follow half-life decay schedules

    value(t) = v_min + (v_max - v_min) * 2 ** (-t / half_life).

Everywhere in this package the action order is the fixed ``Left, Right, Up,
Down`` of :class:`gridfire.mdp.Action`: table columns, probability vectors,
inverse-CDF sampling, argmax tie-breaking, and CSV output all use it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .mdp import NUM_ACTIONS, Action

__all__ = [
    "DecaySchedule",
    "LearnParams",
    "QTable",
    "boltzmann_probs",
    "decay_value",
    "epsilon_greedy_probs",
    "greedy_action",
    "q_update",
    "sample_action",
]

QTABLE_CSV_HEADER = ["state_index", "left", "right", "up", "down"]


class QTable:
    """Dense ``(num_states, 4)`` array of action values, zero-initialized."""

    __slots__ = ("values",)

    def __init__(self, num_states: int):
        if num_states < 1:
            raise ValueError(f"table needs at least one state, got {num_states}")
        self.values = np.zeros((num_states, NUM_ACTIONS))

    @classmethod
    def from_values(cls, values: np.ndarray) -> "QTable":
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != NUM_ACTIONS:
            raise ValueError(f"expected a (num_states, {NUM_ACTIONS}) array, got {arr.shape}")
        table = cls(arr.shape[0])
        table.values[:] = arr
        return table

    @property
    def num_states(self) -> int:
        return self.values.shape[0]

    def row(self, s: int) -> np.ndarray:
        return self.values[s]

    def reset(self) -> None:
        """Zero every entry in place (the canonical blank state)."""
        self.values[:] = 0.0

    def copy(self) -> "QTable":
        return QTable.from_values(self.values)

    def write_csv(self, f: IO[str]) -> None:
        """One row per state, action columns in fixed order, repr-exact floats."""
        w = csv.writer(f, lineterminator="\n")
        w.writerow(QTABLE_CSV_HEADER)
        for s in range(self.num_states):
            w.writerow([s] + [repr(float(v)) for v in self.values[s]])

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            self.write_csv(f)

    @classmethod
    def load_csv(cls, path) -> "QTable":
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        if not rows or rows[0] != QTABLE_CSV_HEADER:
            raise ValueError(f"{path}: not a Q-table CSV")
        values = np.zeros((len(rows) - 1, NUM_ACTIONS))
        for i, row in enumerate(rows[1:]):
            if int(row[0]) != i:
                raise ValueError(f"{path}: rows must be ordered by state index")
            values[i] = [float(v) for v in row[1:]]
        return cls.from_values(values)


@dataclass(frozen=True)
class DecaySchedule:
    """Half-life decay from ``v_max`` down to ``v_min``.

    ``value(t) = v_min + (v_max - v_min) * 2 ** (-t / half_life)``; the value
    is exactly ``v_max`` at t=0 and halfway to ``v_min`` at t=half_life.
    """

    v_max: float
    v_min: float
    half_life: float

    def __post_init__(self) -> None:
        if not self.v_max >= self.v_min >= 0:
            raise ValueError(f"need v_max >= v_min >= 0, got {self.v_max}, {self.v_min}")
        if not self.half_life > 0:
            raise ValueError(f"half-life must be positive, got {self.half_life}")

    @classmethod
    def constant(cls, value: float) -> "DecaySchedule":
        return cls(value, value, 1.0)

    def value(self, t: float) -> float:
        return decay_value(self, t)


def decay_value(sched: DecaySchedule, t: float) -> float:
    if t < 0:
        raise ValueError(f"step must be nonnegative, got {t}")
    return sched.v_min + (sched.v_max - sched.v_min) * 2.0 ** (-t / sched.half_life)


@dataclass(frozen=True)
class LearnParams:
    """Discount factor plus the decay schedules for alpha and temperature."""

    gamma: float
    alpha_schedule: DecaySchedule
    temp_schedule: DecaySchedule

    def __post_init__(self) -> None:
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")


def _check_state(q: QTable, s: int) -> None:
    if not 0 <= s < q.num_states:
        raise ValueError(f"state index {s} out of range for {q.num_states}-state table")


def q_update(q: QTable, s: int, a: Action, r: float, s_next: int, alpha: float, gamma: float) -> float:
    """Apply one experience ``(s, a, r, s_next)`` in place; returns the new Q(s, a).

    Exactly one entry changes. The bootstrap max over the next state's four
    actions uses pre-update values.
    """
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    _check_state(q, s)
    _check_state(q, s_next)
    a = int(a)
    if not 0 <= a < NUM_ACTIONS:
        raise ValueError(f"action index {a} out of range")
    values = q.values
    best_next = max(values[s_next].tolist())
    current = values.item(s, a)
    updated = current + alpha * (r + gamma * best_next - current)
    values[s, a] = updated
    return updated


def softmax_list(row: Sequence[float], temperature: float) -> list[float]:
    """Max-subtracted softmax of one table row; the engine's and the
    server's action draws both go through this exact sequence of float ops,
    which is what makes a networked run replayable in process."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    m = max(row)
    weights = [math.exp((v - m) / temperature) for v in row]
    total = weights[0] + weights[1] + weights[2] + weights[3]
    return [w / total for w in weights]


def boltzmann_probs(q: QTable, s: int, temperature: float) -> np.ndarray:
    """Softmax of Q(s, .) at the given temperature, as a length-4 vector.

    Max-subtraction keeps the exponentials bounded at low temperatures
    without changing the distribution. Pure exploitation is expressed via
    :func:`greedy_action`, not via T=0.
    """
    _check_state(q, s)
    return np.asarray(softmax_list(q.values[s].tolist(), temperature))


def epsilon_greedy_probs(q: QTable, s: int, epsilon: float) -> np.ndarray:
    """Greedy action gets ``1 - eps + eps/4``; every other action ``eps/4``."""
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    probs = np.full(NUM_ACTIONS, epsilon / NUM_ACTIONS)
    probs[greedy_action(q, s)] += 1.0 - epsilon
    return probs


def greedy_action(q: QTable, s: int) -> Action:
    """Argmax over actions; ties go to the lowest action index."""
    _check_state(q, s)
    return Action(int(np.argmax(q.values[s])))


def sample_action(probs: Iterable[float], rng: np.random.Generator) -> Action:
    """Inverse-CDF draw in fixed action order; deterministic given rng state."""
    u = rng.random()
    acc = 0.0
    last = Action.LEFT
    for a, p in zip(Action, probs):
        acc += float(p)
        last = a
        if u < acc:
            return a
    # Cumulative sum can fall a few ulps short of 1; the draw is in the tail.
    return last
