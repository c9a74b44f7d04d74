"""The multi-agent loop: N agents, one shared Q-table, synchronous ticks.

Each tick advances every agent exactly once, in ascending agent id. An
agent's turn within a tick is: select an action from the shared table
(Boltzmann at the current temperature, or epsilon-greedy), observe the
reward of the cell it currently occupies, move (clamped at walls), and
apply the Q-update with the current learning rate. Agents later in the
tick see the table as left by earlier ones, so a run is a single serial
sequence of updates; this serialized order is the engine's observable
semantics and makes runs bit-reproducible from the master seed.

The decay clocks for temperature and learning rate are period-local. With
a period policy configured, the boundary after every ``period_length``-th
tick either resets the table and both clocks (Reset mode, for randomly
changing environments) or keeps the table and warm-restarts only the
temperature clock (CarryForward mode, for slowly changing ones). The fire
schedule itself always follows the global step counter: world time is
never reset.

Agents are cameras, not physical occupants: any number may share a cell.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .learning import (
    LearnParams,
    QTable,
    decay_value,
    epsilon_greedy_probs,
    q_update,
    sample_action,
    softmax_list,
)
from .mdp import Action, CellState, FireSchedule, GridSpec, cell_at, state_index, step
from .metrics import RunMetrics, RunRecorder
from .seeds import STREAM_AGENT, derive_seed

__all__ = [
    "AgentState",
    "BOLTZMANN",
    "CoverageTimeout",
    "Engine",
    "EPSILON_GREEDY",
    "PeriodMode",
    "PeriodPolicy",
    "ExperienceObserver",
]

BOLTZMANN = "boltzmann"
EPSILON_GREEDY = "epsilon-greedy"

# (step, agent_id, s, a, r, s_next) with states as row-major indices.
ExperienceObserver = Callable[[int, int, int, Action, float, int], None]


class PeriodMode(enum.Enum):
    RESET = "reset"
    CARRY_FORWARD = "carry-forward"


@dataclass(frozen=True)
class PeriodPolicy:
    """Periodic re-exploration policy; ``length`` 0 disables boundaries.

    Reset mode zeroes the Q-table and both decay clocks at each boundary.
    CarryForward keeps the table and the learning-rate clock, and restarts
    the temperature clock at ``warm_restart_half_lives`` half-lives in, so
    the next exploration phase is short.
    """

    length: int = 0
    mode: PeriodMode = PeriodMode.RESET
    warm_restart_half_lives: float = 2.0

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ValueError(f"period length must be >= 0, got {self.length}")
        if self.warm_restart_half_lives < 0:
            raise ValueError("warm restart offset must be >= 0")

    @classmethod
    def none(cls) -> "PeriodPolicy":
        return cls(0)


@dataclass
class AgentState:
    """One agent: id, current cell (plus its index), private rng stream."""

    id: int
    cell: CellState
    index: int
    rng: np.random.Generator


class CoverageTimeout(RuntimeError):
    """Raised when the step cap is hit before every state was visited."""

    def __init__(self, steps: int, visited: np.ndarray):
        covered = int(visited.sum())
        super().__init__(
            f"coverage incomplete after {steps} steps ({covered}/{visited.size} states visited)"
        )
        self.steps = steps
        self.visited = visited


class Engine:
    """N agents learning on one shared table in a possibly changing world."""

    def __init__(
        self,
        schedule: FireSchedule,
        params: LearnParams,
        num_agents: int,
        start: CellState | Sequence[CellState],
        seed: int,
        period: PeriodPolicy | None = None,
        strategy: str = BOLTZMANN,
        epsilon: float = 0.1,
        observers: Sequence[ExperienceObserver] = (),
    ):
        if num_agents < 1:
            raise ValueError(f"need at least one agent, got {num_agents}")
        if strategy not in (BOLTZMANN, EPSILON_GREEDY):
            raise ValueError(f"unknown strategy {strategy!r}")
        if not 0 <= epsilon <= 1:
            raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
        self.grid: GridSpec = schedule.grid
        self.schedule = schedule
        self.params = params
        self.period = period or PeriodPolicy.none()
        self.strategy = strategy
        self.epsilon = epsilon
        self.seed = seed
        self._observers = list(observers)

        if isinstance(start, CellState):
            starts = [start] * num_agents
        else:
            starts = list(start)
            if len(starts) != num_agents:
                raise ValueError(f"got {len(starts)} start cells for {num_agents} agents")
        self.qtable = QTable(self.grid.num_states)
        self.step_count = 0
        self.temp_clock = 0.0
        self.alpha_clock = 0.0
        self.recorder = RunRecorder(self.grid.num_states, self.period.length)
        # Transition and cell tables, precomputed once so ticks move agents
        # by state index alone.
        self._cells = [cell_at(self.grid, i) for i in range(self.grid.num_states)]
        self._next_index = [
            [state_index(self.grid, step(self.grid, c, a)) for a in Action] for c in self._cells
        ]
        self.agents: list[AgentState] = []
        for i, cell in enumerate(starts):
            idx = state_index(self.grid, cell)  # validates bounds
            rng = np.random.Generator(np.random.PCG64(derive_seed(seed, STREAM_AGENT, i)))
            self.agents.append(AgentState(id=i, cell=self._cells[idx], index=idx, rng=rng))
            self.recorder.on_spawn(idx)

    def add_observer(self, observer: ExperienceObserver) -> None:
        self._observers.append(observer)

    def tick(self) -> None:
        """Advance every agent once, in ascending id order."""
        t = self.step_count
        field_values = self.schedule.field_at(t).values.tolist()
        gamma = self.params.gamma
        alpha = decay_value(self.params.alpha_schedule, self.alpha_clock)
        boltzmann = self.strategy == BOLTZMANN
        if boltzmann:
            temperature = decay_value(self.params.temp_schedule, self.temp_clock)
        q_values = self.qtable.values
        recorder = self.recorder
        for agent in self.agents:
            s = agent.index
            if boltzmann:
                probs = softmax_list(q_values[s].tolist(), temperature)
            else:
                probs = epsilon_greedy_probs(self.qtable, s, self.epsilon)
            a = sample_action(probs, agent.rng)
            r = field_values[s]
            s_next = self._next_index[s][a]
            q_update(self.qtable, s, a, r, s_next, alpha, gamma)
            recorder.on_experience(t, agent.id, s, a, r, s_next)
            for obs in self._observers:
                obs(t, agent.id, s, a, r, s_next)
            agent.cell = self._cells[s_next]
            agent.index = s_next
        self.step_count = t + 1
        self.temp_clock += 1.0
        self.alpha_clock += 1.0
        if self.period.length and self.step_count % self.period.length == 0:
            self.apply_period_boundary()

    def apply_period_boundary(self) -> None:
        """Reset or carry forward the learned state at a period boundary."""
        self.recorder.on_period_boundary()
        if self.period.mode is PeriodMode.RESET:
            self.qtable.reset()
            self.temp_clock = 0.0
            self.alpha_clock = 0.0
        else:
            self.temp_clock = self.period.warm_restart_half_lives * self.params.temp_schedule.half_life

    def run(self, total_steps: int) -> RunMetrics:
        """Apply ``tick`` ``total_steps`` times and return accumulated metrics."""
        if total_steps < 1:
            raise ValueError(f"total_steps must be >= 1, got {total_steps}")
        for _ in range(total_steps):
            self.tick()
        return self.recorder.finalize()

    def run_until_full_exploration(self, max_steps: int, pairs: bool = False) -> int:
        """Tick until every state (or, with ``pairs``, every state-action pair)
        has been seen; returns the tick count at which coverage completed.

        Initial placement counts, so a saturating start returns 0. Raises
        :class:`CoverageTimeout` carrying the visited-state mask if the cap
        is hit first.
        """
        if max_steps < 0:
            raise ValueError(f"max_steps must be >= 0, got {max_steps}")
        done = (lambda: self.recorder.all_pairs_visited) if pairs else (lambda: self.recorder.all_states_visited)
        while not done():
            if self.step_count >= max_steps:
                raise CoverageTimeout(self.step_count, self.recorder.visited_mask())
            self.tick()
        return self.recorder.pair_coverage_step if pairs else self.recorder.coverage_step

    def metrics(self) -> RunMetrics:
        return self.recorder.finalize()
