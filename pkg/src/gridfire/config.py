"""Experiment configuration: flat ``key = value`` files with ``[section]`` headers.

A minimal file needs nothing but a grid and fire states; everything else
falls back to the standard scenario (4x4 grid, start state 13, gamma 0.9,
fire states 2,3,6,7 at reward 0.25, 50 replications, alpha 0.9 -> 0.01 and
temperature 1.0 -> 0.01 with half-life 50). Lists are comma-separated.

Sections and keys::

    [grid]      width, height
    [fire]      states (indices), reward (value per fire state),
                field_file (reward CSV instead of states/reward),
                segment_<step> / segment_<step>_file (time-varying schedule)
    [run]       agents, steps, start, replications, seed, strategy
                (boltzmann | epsilon-greedy), epsilon, coverage_cap
    [learning]  gamma, alpha_max, alpha_min, alpha_half_life,
                temp_max, temp_min, temp_half_life
    [period]    length (0 disables), mode (reset | carry-forward),
                warm_restart_half_lives
    [sweep]     parameter (temp_half_life | alpha_half_life | agents | steps),
                values, mode (fire_fraction | coverage)

Parse errors carry the line number; semantic errors name the offending key.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import os
from dataclasses import dataclass

from .engine import BOLTZMANN, EPSILON_GREEDY, PeriodMode, PeriodPolicy
from .learning import DecaySchedule, LearnParams
from .mdp import CellState, FireSchedule, GridSpec, RewardField, cell_at
from .rewards import read_field_csv

__all__ = ["ConfigError", "ExperimentConfig", "SweepSpec", "load_config", "dump_config"]

DEFAULT_GRID = (4, 4)
DEFAULT_FIRE_STATES = (2, 3, 6, 7)
DEFAULT_FIRE_REWARD = 0.25
DEFAULT_START = 13
DEFAULT_AGENTS = 1
DEFAULT_STEPS = 180
DEFAULT_REPLICATIONS = 50
DEFAULT_SEED = 2026
DEFAULT_GAMMA = 0.9
DEFAULT_ALPHA = (0.9, 0.01, 50.0)  # max, min, half-life
DEFAULT_TEMP = (1.0, 0.01, 50.0)
DEFAULT_EPSILON = 0.1
DEFAULT_COVERAGE_CAP = 100_000

SWEEPABLE = ("temp_half_life", "alpha_half_life", "agents", "steps")
SWEEP_MODES = ("fire_fraction", "coverage")


class ConfigError(ValueError):
    """A config file that parsed but does not describe a valid experiment,
    or did not parse at all."""


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]
    mode: str = "fire_fraction"


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec
    schedule: FireSchedule
    start: CellState
    num_agents: int
    total_steps: int
    replications: int
    seed: int
    params: LearnParams
    period: PeriodPolicy
    strategy: str
    epsilon: float
    coverage_cap: int
    sweep: SweepSpec | None = None

    @property
    def start_index(self) -> int:
        return self.start.y * self.grid.width + self.start.x


def default_config() -> ExperimentConfig:
    grid = GridSpec(*DEFAULT_GRID)
    field = RewardField.from_fire_states(grid, DEFAULT_FIRE_STATES, DEFAULT_FIRE_REWARD)
    return ExperimentConfig(
        grid=grid,
        schedule=FireSchedule.stationary(field),
        start=cell_at(grid, DEFAULT_START),
        num_agents=DEFAULT_AGENTS,
        total_steps=DEFAULT_STEPS,
        replications=DEFAULT_REPLICATIONS,
        seed=DEFAULT_SEED,
        params=LearnParams(DEFAULT_GAMMA, DecaySchedule(*DEFAULT_ALPHA), DecaySchedule(*DEFAULT_TEMP)),
        period=PeriodPolicy.none(),
        strategy=BOLTZMANN,
        epsilon=DEFAULT_EPSILON,
        coverage_cap=DEFAULT_COVERAGE_CAP,
    )


class _Reader:
    """Typed accessors over a parsed config, tracking which keys were used."""

    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser
        self.used: set[tuple[str, str]] = set()

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str) -> str:
        self.used.add((section, key))
        return self.parser.get(section, key).strip()

    def _typed(self, section, key, default, conv, kind):
        if not self.has(section, key):
            return default
        text = self.raw(section, key)
        try:
            return conv(text)
        except ValueError:
            raise ConfigError(f"{section}.{key}: expected {kind}, got {text!r}") from None

    def get_int(self, section, key, default):
        return self._typed(section, key, default, int, "an integer")

    def get_float(self, section, key, default):
        return self._typed(section, key, default, float, "a number")

    def get_str(self, section, key, default):
        return self._typed(section, key, default, str, "a string")

    def get_list(self, section, key, conv, kind):
        text = self.raw(section, key)
        items = [part.strip() for part in text.split(",") if part.strip()]
        if not items:
            raise ConfigError(f"{section}.{key}: empty list")
        try:
            return [conv(part) for part in items]
        except ValueError:
            raise ConfigError(f"{section}.{key}: expected {kind} list, got {text!r}") from None

    def check_unknown(self) -> None:
        known_sections = {"grid", "fire", "run", "learning", "period", "sweep"}
        for section in self.parser.sections():
            if section not in known_sections:
                raise ConfigError(f"unknown section [{section}]")
            for key in self.parser.options(section):
                if (section, key) not in self.used:
                    raise ConfigError(f"unknown key {section}.{key}")


def _parse_fire(reader: _Reader, grid: GridSpec, base_dir: str) -> FireSchedule:
    parser = reader.parser
    if not parser.has_section("fire"):
        field = RewardField.from_fire_states(grid, DEFAULT_FIRE_STATES, DEFAULT_FIRE_REWARD)
        return FireSchedule.stationary(field)

    keys = parser.options("fire")
    segment_keys = [k for k in keys if k.startswith("segment_")]
    reward = reader.get_float("fire", "reward", DEFAULT_FIRE_REWARD)
    if reward < 0:
        raise ConfigError(f"fire.reward: must be nonnegative, got {reward}")

    def states_field(section_key: str) -> RewardField:
        indices = reader.get_list("fire", section_key, int, "integer")
        for i in indices:
            if not 0 <= i < grid.num_states:
                raise ConfigError(
                    f"fire.{section_key}: state {i} out of range for {grid.width}x{grid.height} grid"
                )
        return RewardField.from_fire_states(grid, indices, reward)

    def values_field(section_key: str) -> RewardField:
        values = reader.get_list("fire", section_key, float, "number")
        if len(values) != grid.num_states:
            raise ConfigError(
                f"fire.{section_key}: {len(values)} values for a {grid.num_states}-cell grid"
            )
        try:
            return RewardField(grid, values)
        except ValueError as e:
            raise ConfigError(f"fire.{section_key}: {e}") from None

    def file_field(section_key: str) -> RewardField:
        path = reader.raw("fire", section_key)
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        try:
            with open(path, newline="") as f:
                return read_field_csv(f, grid)
        except OSError as e:
            raise ConfigError(f"fire.{section_key}: cannot read {path}: {e}") from None
        except ValueError as e:
            raise ConfigError(f"fire.{section_key}: {e}") from None

    if segment_keys:
        if any(reader.has("fire", k) for k in ("states", "values", "field_file")):
            raise ConfigError("fire: give either segment_* keys or a single stationary field, not both")
        segments = []
        for key in segment_keys:
            suffix = key[len("segment_"):]
            build = states_field
            for marker, fn in (("_file", file_field), ("_values", values_field)):
                if suffix.endswith(marker):
                    suffix = suffix[: -len(marker)]
                    build = fn
            try:
                start_step = int(suffix)
            except ValueError:
                raise ConfigError(f"fire.{key}: segment key must be segment_<step>") from None
            if start_step < 0:
                raise ConfigError(f"fire.{key}: segment start must be nonnegative")
            segments.append((start_step, build(key)))
        segments.sort(key=lambda pair: pair[0])
        starts = [s for s, _ in segments]
        if len(set(starts)) != len(starts):
            raise ConfigError("fire: duplicate segment start steps")
        if starts[0] != 0:
            raise ConfigError("fire: the first segment must start at step 0")
        return FireSchedule.of(segments)

    given = [k for k in ("states", "values", "field_file") if reader.has("fire", k)]
    if len(given) > 1:
        raise ConfigError(f"fire: give only one of {', '.join(given)}")
    if given == ["field_file"]:
        return FireSchedule.stationary(file_field("field_file"))
    if given == ["values"]:
        return FireSchedule.stationary(values_field("values"))
    if given == ["states"]:
        return FireSchedule.stationary(states_field("states"))
    field = RewardField.from_fire_states(grid, DEFAULT_FIRE_STATES, DEFAULT_FIRE_REWARD)
    return FireSchedule.stationary(field)


def parse_config(text: str, base_dir: str = ".", source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"parse error: {e}") from None
    reader = _Reader(parser)

    width = reader.get_int("grid", "width", DEFAULT_GRID[0])
    height = reader.get_int("grid", "height", DEFAULT_GRID[1])
    try:
        grid = GridSpec(width, height)
    except ValueError as e:
        raise ConfigError(f"grid: {e}") from None

    schedule = _parse_fire(reader, grid, base_dir)

    start_idx = reader.get_int("run", "start", DEFAULT_START)
    if not 0 <= start_idx < grid.num_states:
        raise ConfigError(
            f"run.start: state {start_idx} out of range for {grid.width}x{grid.height} grid"
        )
    num_agents = reader.get_int("run", "agents", DEFAULT_AGENTS)
    if num_agents < 1:
        raise ConfigError(f"run.agents: need at least one agent, got {num_agents}")
    total_steps = reader.get_int("run", "steps", DEFAULT_STEPS)
    if total_steps < 1:
        raise ConfigError(f"run.steps: need at least one step, got {total_steps}")
    replications = reader.get_int("run", "replications", DEFAULT_REPLICATIONS)
    if replications < 1:
        raise ConfigError(f"run.replications: must be >= 1, got {replications}")
    seed = reader.get_int("run", "seed", DEFAULT_SEED)
    if seed < 0:
        raise ConfigError(f"run.seed: must be nonnegative, got {seed}")
    strategy = reader.get_str("run", "strategy", BOLTZMANN)
    if strategy not in (BOLTZMANN, EPSILON_GREEDY):
        raise ConfigError(f"run.strategy: must be boltzmann or epsilon-greedy, got {strategy!r}")
    epsilon = reader.get_float("run", "epsilon", DEFAULT_EPSILON)
    if not 0 <= epsilon <= 1:
        raise ConfigError(f"run.epsilon: must be in [0, 1], got {epsilon}")
    coverage_cap = reader.get_int("run", "coverage_cap", DEFAULT_COVERAGE_CAP)
    if coverage_cap < 1:
        raise ConfigError(f"run.coverage_cap: must be >= 1, got {coverage_cap}")

    gamma = reader.get_float("learning", "gamma", DEFAULT_GAMMA)
    try:
        alpha = DecaySchedule(
            reader.get_float("learning", "alpha_max", DEFAULT_ALPHA[0]),
            reader.get_float("learning", "alpha_min", DEFAULT_ALPHA[1]),
            reader.get_float("learning", "alpha_half_life", DEFAULT_ALPHA[2]),
        )
        temp = DecaySchedule(
            reader.get_float("learning", "temp_max", DEFAULT_TEMP[0]),
            reader.get_float("learning", "temp_min", DEFAULT_TEMP[1]),
            reader.get_float("learning", "temp_half_life", DEFAULT_TEMP[2]),
        )
        params = LearnParams(gamma, alpha, temp)
    except ValueError as e:
        raise ConfigError(f"learning: {e}") from None
    if not 0 <= alpha.v_max <= 1:
        raise ConfigError(f"learning.alpha_max: must be in [0, 1], got {alpha.v_max}")

    length = reader.get_int("period", "length", 0)
    mode_text = reader.get_str("period", "mode", PeriodMode.RESET.value)
    try:
        mode = PeriodMode(mode_text)
    except ValueError:
        raise ConfigError(f"period.mode: must be reset or carry-forward, got {mode_text!r}") from None
    warm = reader.get_float("period", "warm_restart_half_lives", 2.0)
    try:
        period = PeriodPolicy(length, mode, warm)
    except ValueError as e:
        raise ConfigError(f"period: {e}") from None

    sweep = None
    if parser.has_section("sweep"):
        parameter = reader.get_str("sweep", "parameter", "")
        if parameter not in SWEEPABLE:
            raise ConfigError(f"sweep.parameter: must be one of {', '.join(SWEEPABLE)}, got {parameter!r}")
        if not reader.has("sweep", "values"):
            raise ConfigError("sweep.values: required when [sweep] is present")
        if parameter in ("agents", "steps"):
            values = reader.get_list("sweep", "values", int, "integer")
            if any(v < 1 for v in values):
                raise ConfigError(f"sweep.values: {parameter} values must be >= 1")
        else:
            values = reader.get_list("sweep", "values", float, "number")
            if any(v <= 0 for v in values):
                raise ConfigError("sweep.values: half-lives must be positive")
        mode_text = reader.get_str("sweep", "mode", "fire_fraction")
        if mode_text not in SWEEP_MODES:
            raise ConfigError(f"sweep.mode: must be one of {', '.join(SWEEP_MODES)}, got {mode_text!r}")
        sweep = SweepSpec(parameter, tuple(values), mode_text)

    reader.check_unknown()

    return ExperimentConfig(
        grid=grid,
        schedule=schedule,
        start=cell_at(grid, start_idx),
        num_agents=num_agents,
        total_steps=total_steps,
        replications=replications,
        seed=seed,
        params=params,
        period=period,
        strategy=strategy,
        epsilon=epsilon,
        coverage_cap=coverage_cap,
        sweep=sweep,
    )


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file; every default is resolved."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)), source=str(path))


def with_param(cfg: ExperimentConfig, name: str, value) -> ExperimentConfig:
    """A copy of ``cfg`` with one sweepable parameter replaced."""
    if name == "agents":
        return dataclasses.replace(cfg, num_agents=int(value))
    if name == "steps":
        return dataclasses.replace(cfg, total_steps=int(value))
    if name == "temp_half_life":
        temp = dataclasses.replace(cfg.params.temp_schedule, half_life=float(value))
        return dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, temp_schedule=temp))
    if name == "alpha_half_life":
        alpha = dataclasses.replace(cfg.params.alpha_schedule, half_life=float(value))
        return dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, alpha_schedule=alpha))
    raise ValueError(f"unknown sweep parameter {name!r}")


def dump_config(cfg: ExperimentConfig) -> str:
    """Render a fully resolved config back to file syntax (the echo form).

    Time-varying fire schedules are rendered per segment; fields that did
    not come from uniform fire states are listed value by value.
    """
    out = io.StringIO()

    def section(name: str, pairs) -> None:
        out.write(f"[{name}]\n")
        for k, v in pairs:
            out.write(f"{k} = {v}\n")
        out.write("\n")

    section("grid", [("width", cfg.grid.width), ("height", cfg.grid.height)])

    fire_pairs = []
    uniform = _uniform_fire_value(cfg.schedule)
    single = len(cfg.schedule.segments) == 1
    if uniform is not None and uniform > 0:
        fire_pairs.append(("reward", repr(uniform)))
    for start_step, fld in cfg.schedule.segments:
        if uniform is not None and uniform > 0:
            key = "states" if single else f"segment_{start_step}"
            fire_pairs.append((key, ", ".join(str(i) for i in fld.fire_indices())))
        else:
            key = "values" if single else f"segment_{start_step}_values"
            fire_pairs.append((key, ", ".join(repr(float(v)) for v in fld.values)))
    section("fire", fire_pairs)

    section(
        "run",
        [
            ("agents", cfg.num_agents),
            ("steps", cfg.total_steps),
            ("start", cfg.start_index),
            ("replications", cfg.replications),
            ("seed", cfg.seed),
            ("strategy", cfg.strategy),
            ("epsilon", repr(cfg.epsilon)),
            ("coverage_cap", cfg.coverage_cap),
        ],
    )
    section(
        "learning",
        [
            ("gamma", repr(cfg.params.gamma)),
            ("alpha_max", repr(cfg.params.alpha_schedule.v_max)),
            ("alpha_min", repr(cfg.params.alpha_schedule.v_min)),
            ("alpha_half_life", repr(cfg.params.alpha_schedule.half_life)),
            ("temp_max", repr(cfg.params.temp_schedule.v_max)),
            ("temp_min", repr(cfg.params.temp_schedule.v_min)),
            ("temp_half_life", repr(cfg.params.temp_schedule.half_life)),
        ],
    )
    section(
        "period",
        [
            ("length", cfg.period.length),
            ("mode", cfg.period.mode.value),
            ("warm_restart_half_lives", repr(cfg.period.warm_restart_half_lives)),
        ],
    )
    if cfg.sweep is not None:
        section(
            "sweep",
            [
                ("parameter", cfg.sweep.parameter),
                ("values", ", ".join(str(v) for v in cfg.sweep.values)),
                ("mode", cfg.sweep.mode),
            ],
        )
    return out.getvalue()


def _uniform_fire_value(schedule: FireSchedule) -> float | None:
    """The single positive value shared by all fire cells, if there is one."""
    values = set()
    for _, fld in schedule.segments:
        values.update(float(v) for v in fld.values if v > 0)
    if not values:
        return 0.0
    if len(values) == 1:
        return values.pop()
    return None
