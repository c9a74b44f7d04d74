"""Rewards from images: fire-pixel fraction of a tile, normalized by zoom.

A tile's reward is ``(fire pixels / total pixels) / zoom_factor``. The
"fire pixel" test is a plain per-channel threshold (red at least
``min_red``, green at most ``max_green``, blue at most ``max_blue``); real
fire detection is out of scope, and the thresholds are configurable. The
zoom normalization keeps a zoomed-in capture from inflating its apparent
fire coverage, so zoom factors below 1 are rejected.

File input is binary PPM (P6, 8-bit, maxval 255). An image is mapped onto
a grid by splitting it into equal-size tiles, truncating remainder pixels
at the right and bottom edges; tile (column i, row j) feeds grid state
``j * columns + i``, matching the row-major state indexing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO

import numpy as np

from .mdp import GridSpec, RewardField

__all__ = [
    "FireClassifier",
    "ImageTile",
    "field_from_image",
    "fire_pixel_fraction",
    "read_field_csv",
    "read_ppm",
    "reward_from_tile",
    "split_tiles",
    "write_field_csv",
    "write_ppm",
]

FIELD_CSV_HEADER = ["state_index", "reward"]


@dataclass(frozen=True)
class FireClassifier:
    """Per-pixel RGB threshold; a pure function of the pixel's channels."""

    min_red: int = 200
    max_green: int = 120
    max_blue: int = 80

    def __post_init__(self) -> None:
        for name, v in (("min_red", self.min_red), ("max_green", self.max_green), ("max_blue", self.max_blue)):
            if not 0 <= v <= 255:
                raise ValueError(f"{name} must be an 8-bit value, got {v}")

    def mask(self, pixels: np.ndarray) -> np.ndarray:
        """Boolean fire mask for an (..., 3) uint8 pixel array."""
        r = pixels[..., 0].astype(np.int16)
        g = pixels[..., 1].astype(np.int16)
        b = pixels[..., 2].astype(np.int16)
        return (r >= self.min_red) & (g <= self.max_green) & (b <= self.max_blue)


class ImageTile:
    """One RGB tile (8 bits per channel) plus the zoom it was captured at."""

    __slots__ = ("pixels", "zoom_factor")

    def __init__(self, pixels: np.ndarray, zoom_factor: float = 1.0):
        arr = np.asarray(pixels, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (height, width, 3) pixels, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("tile must contain at least one pixel")
        if not zoom_factor >= 1:
            raise ValueError(f"zoom factor must be >= 1, got {zoom_factor}")
        self.pixels = arr
        self.zoom_factor = float(zoom_factor)

    @classmethod
    def from_rgb_bytes(cls, width: int, height: int, data: bytes, zoom_factor: float = 1.0) -> "ImageTile":
        """Build a tile from row-major RGB triples."""
        if width < 1 or height < 1:
            raise ValueError(f"tile dimensions must be positive, got {width}x{height}")
        if len(data) != width * height * 3:
            raise ValueError(f"expected {width * height * 3} bytes, got {len(data)}")
        arr = np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3)
        return cls(arr, zoom_factor)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def fire_pixel_fraction(tile: ImageTile, clf: FireClassifier | None = None) -> float:
    """Fraction of the tile's pixels the classifier marks as fire, in [0, 1]."""
    clf = clf or FireClassifier()
    total = tile.pixels.shape[0] * tile.pixels.shape[1]
    if total == 0:
        raise ValueError("cannot compute a pixel fraction of an empty tile")
    return int(np.count_nonzero(clf.mask(tile.pixels))) / total


def reward_from_tile(tile: ImageTile, clf: FireClassifier | None = None) -> float:
    """Fire-pixel fraction divided by the tile's zoom factor."""
    if not tile.zoom_factor >= 1:
        raise ValueError(f"zoom factor must be >= 1, got {tile.zoom_factor}")
    return fire_pixel_fraction(tile, clf) / tile.zoom_factor


def split_tiles(pixels: np.ndarray, columns: int, rows: int, zoom_factor: float = 1.0) -> list[ImageTile]:
    """Split an image into a columns x rows grid of equal tiles.

    Remainder pixels at the right/bottom edges are truncated. Tiles come
    back in row-major order, matching grid state indexing.
    """
    arr = np.asarray(pixels, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (height, width, 3) pixels, got shape {arr.shape}")
    if columns < 1 or rows < 1:
        raise ValueError(f"tile grid must be at least 1x1, got {columns}x{rows}")
    tile_w = arr.shape[1] // columns
    tile_h = arr.shape[0] // rows
    if tile_w == 0 or tile_h == 0:
        raise ValueError(
            f"{columns}x{rows} grid is finer than the {arr.shape[1]}x{arr.shape[0]} image"
        )
    tiles = []
    for j in range(rows):
        for i in range(columns):
            block = arr[j * tile_h : (j + 1) * tile_h, i * tile_w : (i + 1) * tile_w]
            tiles.append(ImageTile(block, zoom_factor))
    return tiles


def field_from_image(
    pixels: np.ndarray,
    columns: int,
    rows: int,
    zoom_factor: float = 1.0,
    clf: FireClassifier | None = None,
) -> RewardField:
    """Per-tile rewards of an image, as a reward field on a columns x rows grid."""
    tiles = split_tiles(pixels, columns, rows, zoom_factor)
    grid = GridSpec(columns, rows)
    return RewardField(grid, [reward_from_tile(t, clf) for t in tiles])


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM (P6, maxval 255) into a (height, width, 3) uint8 array."""
    with open(path, "rb") as f:
        data = f.read()

    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed between them.
    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            c = data[pos : pos + 1]
            if c == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PPM header")
        return data[start:pos]

    magic = next_token()
    if magic != b"P6":
        raise ValueError(f"{path}: unsupported format {magic!r}, need binary PPM (P6)")
    width = int(next_token())
    height = int(next_token())
    maxval = int(next_token())
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise ValueError(f"{path}: bad dimensions {width}x{height}")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + width * height * 3]
    if len(raster) != width * height * 3:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3).copy()


def write_ppm(path, pixels: np.ndarray) -> None:
    arr = np.asarray(pixels, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (height, width, 3) pixels, got shape {arr.shape}")
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (arr.shape[1], arr.shape[0]))
        f.write(arr.tobytes())


def write_field_csv(f: IO[str], field: RewardField) -> None:
    """``state_index,reward`` rows; repr floats so values round-trip exactly."""
    w = csv.writer(f, lineterminator="\n")
    w.writerow(FIELD_CSV_HEADER)
    for i, v in enumerate(field.values):
        w.writerow([i, repr(float(v))])


def read_field_csv(f: IO[str], grid: GridSpec) -> RewardField:
    rows = list(csv.reader(f))
    if not rows or rows[0] != FIELD_CSV_HEADER:
        raise ValueError("not a reward-field CSV (bad header)")
    values = np.zeros(grid.num_states)
    seen = set()
    for row in rows[1:]:
        if len(row) != 2:
            raise ValueError(f"bad reward-field row: {row!r}")
        i = int(row[0])
        if not 0 <= i < grid.num_states:
            raise ValueError(f"state index {i} out of range for {grid.width}x{grid.height} grid")
        if i in seen:
            raise ValueError(f"duplicate state index {i}")
        seen.add(i)
        values[i] = float(row[1])
    if len(seen) != grid.num_states:
        raise ValueError(f"reward-field CSV covers {len(seen)} of {grid.num_states} states")
    return RewardField(grid, values)
