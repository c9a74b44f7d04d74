"""Grid-world MDP primitives: cells, moves, reward fields, fire schedules.

The world is a ``width x height`` rectangular grid. A cell ``(x, y)`` has
``x`` indexing columns left to right and ``y`` indexing rows top to bottom,
so ``Action.DOWN`` increases ``y``. Cells are also addressed by a row-major
integer index (``index = y * width + x``); on a 4x4 grid the bottom-row cell
``(1, 3)`` is state 13.

Transitions are deterministic. A move that would leave the grid clamps: the
action is a no-op at the wall, the agent stays put. Rewards depend on the
occupied cell alone, never on the action taken, and may change over time
through a :class:`FireSchedule` (a piecewise-constant timeline of
:class:`RewardField` values). Any cell with strictly positive reward is a
"fire" cell.

Everything in this module is an immutable value, safe to share between
threads without coordination.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "Action",
    "NUM_ACTIONS",
    "CellState",
    "GridSpec",
    "RewardField",
    "FireSchedule",
    "cell_at",
    "opposite",
    "reward_at",
    "state_index",
    "step",
]


class Action(IntEnum):
    """The four grid moves, in the fixed order used everywhere.

    This order (Left, Right, Up, Down) is the layout of Q-table columns,
    probability vectors, CSV columns, and the wire protocol's action names.
    """

    LEFT = 0
    RIGHT = 1
    UP = 2
    DOWN = 3


NUM_ACTIONS = len(Action)

_DELTA = {
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
    Action.UP: (0, -1),
    Action.DOWN: (0, 1),
}

_OPPOSITE = {
    Action.LEFT: Action.RIGHT,
    Action.RIGHT: Action.LEFT,
    Action.UP: Action.DOWN,
    Action.DOWN: Action.UP,
}


def opposite(action: Action) -> Action:
    return _OPPOSITE[Action(action)]


@dataclass(frozen=True)
class CellState:
    """A grid cell: column ``x``, row ``y``."""

    x: int
    y: int


@dataclass(frozen=True)
class GridSpec:
    """Dimensions of the rectangular grid; the state set has width*height cells."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.width}x{self.height}")

    @property
    def num_states(self) -> int:
        return self.width * self.height

    def contains(self, cell: CellState) -> bool:
        return 0 <= cell.x < self.width and 0 <= cell.y < self.height

    def cells(self) -> Iterator[CellState]:
        """All cells in row-major (index) order."""
        for y in range(self.height):
            for x in range(self.width):
                yield CellState(x, y)


def state_index(grid: GridSpec, s: CellState) -> int:
    """Row-major index of ``s``: ``y * width + x``."""
    if not grid.contains(s):
        raise ValueError(f"cell ({s.x},{s.y}) outside {grid.width}x{grid.height} grid")
    return s.y * grid.width + s.x


def cell_at(grid: GridSpec, index: int) -> CellState:
    """Inverse of :func:`state_index`."""
    if not 0 <= index < grid.num_states:
        raise ValueError(f"state index {index} out of range for {grid.width}x{grid.height} grid")
    return CellState(index % grid.width, index // grid.width)


def step(grid: GridSpec, s: CellState, a: Action) -> CellState:
    """Deterministic transition: move one cell in direction ``a``, clamping at walls."""
    if not grid.contains(s):
        raise ValueError(f"cell ({s.x},{s.y}) outside {grid.width}x{grid.height} grid")
    dx, dy = _DELTA[Action(a)]
    nx, ny = s.x + dx, s.y + dy
    if 0 <= nx < grid.width and 0 <= ny < grid.height:
        return CellState(nx, ny)
    return s


class RewardField:
    """Nonnegative per-cell rewards for one grid, indexed by state index.

    Immutable after construction (the value array is marked read-only).
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values: Iterable[float]):
        arr = np.array(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
        arr = arr.reshape(-1)
        if arr.size != grid.num_states:
            raise ValueError(
                f"reward field has {arr.size} values, grid has {grid.num_states} cells"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("reward values must be finite")
        if np.any(arr < 0):
            raise ValueError("reward values must be nonnegative")
        arr.flags.writeable = False
        self.grid = grid
        self.values = arr

    @classmethod
    def zeros(cls, grid: GridSpec) -> "RewardField":
        return cls(grid, np.zeros(grid.num_states))

    @classmethod
    def from_fire_states(cls, grid: GridSpec, indices: Iterable[int], value: float = 1.0) -> "RewardField":
        """Field with ``value`` at the given state indices and 0 elsewhere."""
        vals = np.zeros(grid.num_states)
        for i in indices:
            if not 0 <= i < grid.num_states:
                raise ValueError(
                    f"state index {i} out of range for {grid.width}x{grid.height} grid"
                )
            vals[i] = value
        return cls(grid, vals)

    def value_at(self, index: int) -> float:
        return float(self.values[index])

    def value_of(self, cell: CellState) -> float:
        return float(self.values[state_index(self.grid, cell)])

    def fire_indices(self) -> list[int]:
        """Indices of cells with strictly positive reward."""
        return [int(i) for i in np.flatnonzero(self.values > 0)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RewardField):
            return NotImplemented
        return self.grid == other.grid and bool(np.array_equal(self.values, other.values))

    def __repr__(self) -> str:
        return f"RewardField({self.grid.width}x{self.grid.height}, fire={self.fire_indices()})"


@dataclass(frozen=True)
class FireSchedule:
    """Piecewise-constant reward timeline: ``segments`` of (start_step, field).

    The field active at step ``t`` is the one of the last segment whose
    start_step is <= t. The first segment must start at step 0 and starts
    must be strictly increasing.
    """

    segments: tuple[tuple[int, RewardField], ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("schedule needs at least one segment")
        starts = [s for s, _ in self.segments]
        if starts[0] != 0:
            raise ValueError(f"first segment must start at step 0, got {starts[0]}")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment start steps must be strictly increasing")
        grid = self.segments[0][1].grid
        if any(f.grid != grid for _, f in self.segments):
            raise ValueError("all segments must share one grid")
        object.__setattr__(self, "_starts", tuple(starts))

    @classmethod
    def stationary(cls, field: RewardField) -> "FireSchedule":
        return cls(((0, field),))

    @classmethod
    def of(cls, segments: Sequence[tuple[int, RewardField]]) -> "FireSchedule":
        return cls(tuple((int(s), f) for s, f in segments))

    @property
    def grid(self) -> GridSpec:
        return self.segments[0][1].grid

    def change_points(self) -> list[int]:
        return [s for s, _ in self.segments]

    def field_at(self, t: int) -> RewardField:
        if t < 0:
            raise ValueError(f"step must be nonnegative, got {t}")
        i = bisect_right(self._starts, t) - 1
        return self.segments[i][1]


def reward_at(schedule: FireSchedule, t: int, s: CellState) -> float:
    """Reward of occupying cell ``s`` at step ``t`` under the active field."""
    return schedule.field_at(t).value_of(s)
