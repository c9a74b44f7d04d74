"""Run accounting and cross-run aggregation.

A :class:`RunRecorder` is attached to an engine and counts, per agent-step:
occupancy of fire cells (reward > 0), visits for coverage tracking, and
period-local windows for the per-period fire-time fractions. The occupancy
counted for each step is the cell the agent is in when it acts, so an
agent's initial placement is observed on its first step; visit counts
additionally include the initial placements themselves, which is why
``sum(visit_counts) == total_agent_steps + num_agents``.

Cross-run aggregation reports sample means and (n-1)-denominator standard
deviations. Machine output always carries fractions in [0, 1]; rendering as
percentages is presentation only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .learning import QTable, greedy_action
from .mdp import NUM_ACTIONS, Action

__all__ = [
    "RunMetrics",
    "RunRecorder",
    "SummaryPoint",
    "SweepRow",
    "aggregate",
    "extract_policy",
    "extract_values",
    "fire_time_fraction",
    "mean_std",
    "write_sweep_csv",
]

SWEEP_CSV_HEADER = [
    "param_name",
    "param_value",
    "n_agents",
    "steps",
    "mean_fire_fraction",
    "std_fire_fraction",
    "mean_coverage_steps",
    "std_coverage_steps",
]


@dataclass
class RunMetrics:
    """Measured quantities of one finished run."""

    visit_counts: np.ndarray
    fire_steps: int
    total_agent_steps: int
    coverage_step: int | None
    per_period_fire_fraction: list[float]


def fire_time_fraction(m: RunMetrics) -> float:
    """Fraction of all agent-steps spent occupying fire cells."""
    if m.total_agent_steps <= 0:
        raise ValueError("fire-time fraction undefined for a zero-step run")
    return m.fire_steps / m.total_agent_steps


def extract_values(q: QTable) -> np.ndarray:
    """Per-state value V(s) = max_a Q(s, a)."""
    return q.values.max(axis=1)


def extract_policy(q: QTable) -> list[Action]:
    """Per-state greedy action, ties to the lowest action index."""
    return [greedy_action(q, s) for s in range(q.num_states)]


class RunRecorder:
    """Single-writer accumulator fed by the engine, one per run."""

    def __init__(self, num_states: int, period_length: int = 0):
        self.num_states = num_states
        self.period_length = period_length
        self.visit_counts = [0] * num_states
        self.fire_steps = 0
        self.total_agent_steps = 0
        self.num_agents = 0
        self.coverage_step: int | None = None
        self.pair_coverage_step: int | None = None
        self._visited = [False] * num_states
        self._unvisited = num_states
        self._visited_pairs = [[False] * NUM_ACTIONS for _ in range(num_states)]
        self._unvisited_pairs = num_states * NUM_ACTIONS
        self._window_fire = 0
        self._window_total = 0
        self.per_period_fire_fraction: list[float] = []

    def on_spawn(self, state: int) -> None:
        """Initial placement: counts as a visit (coverage may complete at step 0)."""
        self.num_agents += 1
        self.visit_counts[state] += 1
        self._mark_visited(state, at_step=0)

    def on_experience(self, step: int, agent_id: int, s: int, a: Action, r: float, s_next: int) -> None:
        self.total_agent_steps += 1
        self._window_total += 1
        if r > 0:
            self.fire_steps += 1
            self._window_fire += 1
        self.visit_counts[s_next] += 1
        self._mark_visited(s_next, at_step=step + 1)
        pair_row = self._visited_pairs[s]
        if not pair_row[a]:
            pair_row[a] = True
            self._unvisited_pairs -= 1
            if self._unvisited_pairs == 0 and self.pair_coverage_step is None:
                self.pair_coverage_step = step + 1

    def _mark_visited(self, state: int, at_step: int) -> None:
        if not self._visited[state]:
            self._visited[state] = True
            self._unvisited -= 1
            if self._unvisited == 0 and self.coverage_step is None:
                self.coverage_step = at_step

    def on_period_boundary(self) -> None:
        """Close the current period window."""
        if self._window_total > 0:
            self.per_period_fire_fraction.append(self._window_fire / self._window_total)
        self._window_fire = 0
        self._window_total = 0

    @property
    def all_states_visited(self) -> bool:
        return self._unvisited == 0

    @property
    def all_pairs_visited(self) -> bool:
        return self._unvisited_pairs == 0

    def visited_mask(self) -> np.ndarray:
        return np.asarray(self._visited, dtype=bool)

    def finalize(self) -> RunMetrics:
        """Snapshot the totals, closing any partial trailing period window."""
        periods = list(self.per_period_fire_fraction)
        if self._window_total > 0:
            periods.append(self._window_fire / self._window_total)
        return RunMetrics(
            visit_counts=np.asarray(self.visit_counts, dtype=np.int64),
            fire_steps=self.fire_steps,
            total_agent_steps=self.total_agent_steps,
            coverage_step=self.coverage_step,
            per_period_fire_fraction=periods,
        )


@dataclass(frozen=True)
class SummaryPoint:
    """Mean/std of the run metrics at one parameter point."""

    n_runs: int
    mean_fire_fraction: float
    std_fire_fraction: float
    mean_coverage_steps: float
    std_coverage_steps: float
    degenerate: bool  # single run: std reported as 0 by convention


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and (n-1)-denominator std; (x, 0) for one value, NaNs for none."""
    if not values:
        return float("nan"), float("nan")
    if len(values) == 1:
        return float(values[0]), 0.0
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1))


def aggregate(runs: Sequence[RunMetrics]) -> SummaryPoint:
    """Sample mean and (n-1)-std of fire-time fraction and coverage steps.

    Coverage statistics are taken over the runs that completed coverage;
    they are NaN when none did.
    """
    if not runs:
        raise ValueError("aggregate needs at least one run")
    fractions = [fire_time_fraction(m) for m in runs]
    coverage = [float(m.coverage_step) for m in runs if m.coverage_step is not None]
    mean_f, std_f = mean_std(fractions)
    mean_c, std_c = mean_std(coverage)
    return SummaryPoint(
        n_runs=len(runs),
        mean_fire_fraction=mean_f,
        std_fire_fraction=std_f,
        mean_coverage_steps=mean_c,
        std_coverage_steps=std_c,
        degenerate=len(runs) == 1,
    )


@dataclass(frozen=True)
class SweepRow:
    """One output row of a parameter sweep."""

    param_name: str
    param_value: float
    n_agents: int
    steps: int
    summary: SummaryPoint


def _fmt(x: float) -> str:
    return format(x, ".12g")


def write_sweep_csv(f: IO[str], rows: Sequence[SweepRow]) -> None:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(SWEEP_CSV_HEADER)
    for r in rows:
        s = r.summary
        w.writerow(
            [
                r.param_name,
                _fmt(r.param_value),
                r.n_agents,
                r.steps,
                _fmt(s.mean_fire_fraction),
                _fmt(s.std_fire_fraction),
                _fmt(s.mean_coverage_steps),
                _fmt(s.std_coverage_steps),
            ]
        )
