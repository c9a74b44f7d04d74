"""Multi-agent tabular Q-learning on grid worlds with one shared Q-table.

The library is organized bottom-up:

- :mod:`gridfire.mdp` — grid, actions, deterministic transitions, reward
  fields and their piecewise-constant timelines ("fire schedules").
- :mod:`gridfire.learning` — the Q-table, the one-step update, Boltzmann /
  epsilon-greedy action selection, half-life decay schedules.
- :mod:`gridfire.engine` — N agents ticking synchronously against the
  shared table, with periodic re-exploration (reset or carry-forward).
- :mod:`gridfire.metrics` — per-run accounting (fire-time fraction,
  coverage) and cross-run aggregation.
- :mod:`gridfire.rewards` — rewards from images: fire-pixel fraction of a
  tile, normalized by zoom.
- :mod:`gridfire.netstore` — a TCP server owning the shared table plus a
  client, so agents can run as separate processes.
- :mod:`gridfire.config` / :mod:`gridfire.harness` / :mod:`gridfire.cli` —
  experiment configs, sweeps, and the command-line front end.
"""

from .engine import (
    BOLTZMANN,
    EPSILON_GREEDY,
    AgentState,
    CoverageTimeout,
    Engine,
    PeriodMode,
    PeriodPolicy,
)
from .learning import (
    DecaySchedule,
    LearnParams,
    QTable,
    boltzmann_probs,
    decay_value,
    epsilon_greedy_probs,
    greedy_action,
    q_update,
    sample_action,
)
from .mdp import (
    Action,
    CellState,
    FireSchedule,
    GridSpec,
    RewardField,
    cell_at,
    opposite,
    reward_at,
    state_index,
    step,
)
from .metrics import (
    RunMetrics,
    RunRecorder,
    SummaryPoint,
    SweepRow,
    aggregate,
    extract_policy,
    extract_values,
    fire_time_fraction,
)
from .seeds import derive_seed, splitmix64

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AgentState",
    "BOLTZMANN",
    "CellState",
    "CoverageTimeout",
    "DecaySchedule",
    "EPSILON_GREEDY",
    "Engine",
    "FireSchedule",
    "GridSpec",
    "LearnParams",
    "PeriodMode",
    "PeriodPolicy",
    "QTable",
    "RewardField",
    "RunMetrics",
    "RunRecorder",
    "SummaryPoint",
    "SweepRow",
    "aggregate",
    "boltzmann_probs",
    "cell_at",
    "decay_value",
    "derive_seed",
    "epsilon_greedy_probs",
    "extract_policy",
    "extract_values",
    "fire_time_fraction",
    "greedy_action",
    "opposite",
    "q_update",
    "reward_at",
    "sample_action",
    "splitmix64",
    "state_index",
    "step",
]
