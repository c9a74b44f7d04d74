"""Replicated runs, parameter sweeps, and adaptation experiments.

Every run's seed descends from the config's master seed through the
documented splitmix64 derivation: replication ``r`` of a plain run uses
``derive_seed(master, STREAM_RUN, r)``; replication ``r`` at sweep point
``p`` uses ``derive_seed(master, STREAM_SWEEP, p, r)``. Sweep points are
executed and reported in canonical order (sorted by parameter value), so
output files are byte-stable for a given master seed no matter how the
work is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, with_param
from .engine import CoverageTimeout, Engine
from .metrics import RunMetrics, SummaryPoint, SweepRow, aggregate, mean_std
from .seeds import STREAM_RUN, STREAM_SWEEP, derive_seed

__all__ = [
    "AdaptRow",
    "build_engine",
    "run_adapt",
    "run_coverage_replications",
    "run_replications",
    "run_single",
    "run_sweep",
]


def build_engine(cfg: ExperimentConfig, seed: int, observers=()) -> Engine:
    return Engine(
        schedule=cfg.schedule,
        params=cfg.params,
        num_agents=cfg.num_agents,
        start=cfg.start,
        seed=seed,
        period=cfg.period,
        strategy=cfg.strategy,
        epsilon=cfg.epsilon,
        observers=observers,
    )


def run_single(cfg: ExperimentConfig, replication: int = 0, observers=()) -> tuple[Engine, RunMetrics]:
    """One full run; the engine is returned for table inspection."""
    engine = build_engine(cfg, derive_seed(cfg.seed, STREAM_RUN, replication), observers)
    metrics = engine.run(cfg.total_steps)
    return engine, metrics


def run_replications(cfg: ExperimentConfig, point: int | None = None) -> list[RunMetrics]:
    """``cfg.replications`` independent runs; ``point`` switches to sweep seeding."""
    out = []
    for r in range(cfg.replications):
        if point is None:
            seed = derive_seed(cfg.seed, STREAM_RUN, r)
        else:
            seed = derive_seed(cfg.seed, STREAM_SWEEP, point, r)
        engine = build_engine(cfg, seed)
        out.append(engine.run(cfg.total_steps))
    return out


def run_coverage_replications(cfg: ExperimentConfig, point: int | None = None) -> list[int]:
    """Steps to full exploration per replication; cap hits count as the cap."""
    out = []
    for r in range(cfg.replications):
        if point is None:
            seed = derive_seed(cfg.seed, STREAM_RUN, r)
        else:
            seed = derive_seed(cfg.seed, STREAM_SWEEP, point, r)
        engine = build_engine(cfg, seed)
        try:
            out.append(engine.run_until_full_exploration(cfg.coverage_cap))
        except CoverageTimeout as e:
            out.append(e.steps)
    return out


def run_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    """One aggregated row per sweep point, in sorted parameter order."""
    if cfg.sweep is None:
        raise ValueError("config has no sweep axis")
    rows = []
    values = sorted(cfg.sweep.values)
    for point, value in enumerate(values):
        variant = with_param(cfg, cfg.sweep.parameter, value)
        if cfg.sweep.mode == "coverage":
            steps = run_coverage_replications(variant, point=point)
            mean_c, std_c = mean_std([float(s) for s in steps])
            summary = SummaryPoint(
                n_runs=len(steps),
                mean_fire_fraction=float("nan"),
                std_fire_fraction=float("nan"),
                mean_coverage_steps=mean_c,
                std_coverage_steps=std_c,
                degenerate=len(steps) == 1,
            )
        else:
            summary = aggregate(run_replications(variant, point=point))
        rows.append(
            SweepRow(
                param_name=cfg.sweep.parameter,
                param_value=float(value),
                n_agents=variant.num_agents,
                steps=variant.total_steps,
                summary=summary,
            )
        )
    return rows


@dataclass(frozen=True)
class AdaptRow:
    """Mean per-period fire-time fraction across replications."""

    period_index: int
    start_step: int
    mean_fire_fraction: float
    std_fire_fraction: float
    n_runs: int


def validate_adapt(cfg: ExperimentConfig) -> list[str]:
    """Check period/segment alignment; returns human-readable warnings."""
    if cfg.period.length < 1:
        raise ValueError("adapt mode needs period.length >= 1")
    warnings = []
    changes = cfg.schedule.change_points()
    if len(changes) < 2:
        warnings.append("stationary schedule, adapt mode degenerate")
    for start in changes[1:]:
        if start % cfg.period.length != 0:
            raise ValueError(
                f"segment start {start} is not aligned to the {cfg.period.length}-step period"
            )
    return warnings


def run_adapt(cfg: ExperimentConfig) -> list[AdaptRow]:
    """Per-period fractions, averaged over replications."""
    validate_adapt(cfg)
    per_run = [m.per_period_fire_fraction for m in run_replications(cfg)]
    n_periods = min(len(p) for p in per_run)
    rows = []
    for k in range(n_periods):
        vals = np.array([p[k] for p in per_run])
        std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        rows.append(
            AdaptRow(
                period_index=k,
                start_step=k * cfg.period.length,
                mean_fire_fraction=float(vals.mean()),
                std_fire_fraction=std,
                n_runs=len(vals),
            )
        )
    return rows
