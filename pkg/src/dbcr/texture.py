"""Local Binary Pattern and Directional Binary Code maps.

Pixels are addressed as ``(i, j) = (row, column)``.  Positions outside the
grid read the nearest edge pixel, so every code map keeps the source
dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import FusionError
from .image import as_grid, encode_pgm

DIRECTIONS = (0, 45, 90, 135)

# Neighbour offset (di, dj) per direction, in units of d.
DIRECTION_OFFSETS = {
    0: (0, -1),
    45: (-1, 1),
    90: (-1, 0),
    135: (-1, -1),
}

# The nine positions whose derivatives form one code, most significant bit first.
DBC_POSITIONS = (
    (0, 0), (0, -1), (-1, -1), (-1, 0), (-1, 1),
    (0, 1), (1, 1), (1, 0), (1, -1),
)

# P=8, R=1 neighbours, p=0 east then counter-clockwise (rows grow downwards).
_LBP8_OFFSETS = (
    (0, 1), (-1, 1), (-1, 0), (-1, -1),
    (0, -1), (1, -1), (1, 0), (1, 1),
)


@dataclass(frozen=True)
class DbcParams:
    distance: int = 1
    directions: tuple[int, ...] = DIRECTIONS

    def __post_init__(self):
        if int(self.distance) != self.distance or self.distance < 1:
            raise ValueError(f"DBC distance must be a positive integer, got {self.distance}")
        dirs = tuple(int(a) for a in self.directions)
        if not dirs:
            raise ValueError("at least one DBC direction is required")
        bad = [a for a in dirs if a not in DIRECTION_OFFSETS]
        if bad:
            raise ValueError(f"unsupported DBC directions {bad}; choose from {DIRECTIONS}")
        if len(set(dirs)) != len(dirs):
            raise ValueError(f"duplicate DBC directions in {dirs}")
        object.__setattr__(self, "distance", int(self.distance))
        object.__setattr__(self, "directions", dirs)


@dataclass(frozen=True)
class LbpParams:
    neighbors: int = 8
    radius: float = 1.0

    def __post_init__(self):
        if int(self.neighbors) != self.neighbors or self.neighbors < 4:
            raise ValueError(f"LBP needs at least 4 neighbours, got {self.neighbors}")
        if self.radius < 1:
            raise ValueError(f"LBP radius must be >= 1, got {self.radius}")


@dataclass(frozen=True)
class CodeMap:
    codes: np.ndarray
    code_bits: int
    direction: int | str | None = None

    @property
    def width(self) -> int:
        return self.codes.shape[1]

    @property
    def height(self) -> int:
        return self.codes.shape[0]

    def to_pgm(self) -> bytes:
        """Debug rendering; 9-bit codes are halved to fit one byte."""
        shift = max(self.code_bits - 8, 0)
        return encode_pgm(self.codes >> shift)


def _clamped(grid: np.ndarray, i: int, j: int) -> float:
    h, w = grid.shape
    return grid[min(max(i, 0), h - 1), min(max(j, 0), w - 1)]


def directional_derivative(grid, direction: int, d: int, i: int, j: int) -> float:
    """First-order difference between pixel (i, j) and its neighbour along ``direction``."""
    grid = as_grid(grid)
    di, dj = DIRECTION_OFFSETS[direction]
    return float(_clamped(grid, i, j) - _clamped(grid, i + di * d, j + dj * d))


def dbc_threshold(x: float) -> int:
    return 1 if x >= 0 else 0


def _derivative_field(grid: np.ndarray, direction: int, d: int) -> np.ndarray:
    """Derivatives on the grid extended by ``d`` on each side."""
    h, w = grid.shape
    padded = np.pad(grid, 2 * d, mode="edge")
    di, dj = DIRECTION_OFFSETS[direction]
    here = padded[d:d + h + 2 * d, d:d + w + 2 * d]
    oi, oj = d + di * d, d + dj * d
    there = padded[oi:oi + h + 2 * d, oj:oj + w + 2 * d]
    return here - there


def dbc_code_map(grid, direction: int, params: DbcParams = DbcParams()) -> CodeMap:
    grid = as_grid(grid)
    if direction not in DIRECTION_OFFSETS:
        raise ValueError(f"unsupported DBC direction {direction}")
    d = params.distance
    h, w = grid.shape
    bits = _derivative_field(grid, direction, d) >= 0
    codes = np.zeros((h, w), dtype=np.int32)
    for pi, pj in DBC_POSITIONS:
        oi, oj = d + pi * d, d + pj * d
        codes = (codes << 1) | bits[oi:oi + h, oj:oj + w]
    return CodeMap(codes, 9, direction)


def dbc_code_maps(grid, params: DbcParams = DbcParams()) -> list[CodeMap]:
    return [dbc_code_map(grid, a, params) for a in params.directions]


def _bilinear_sample(padded: np.ndarray, margin: int, h: int, w: int,
                     di: float, dj: float) -> np.ndarray:
    i0, j0 = math.floor(di), math.floor(dj)
    fi, fj = di - i0, dj - j0

    def view(a, b):
        return padded[margin + a:margin + a + h, margin + b:margin + b + w]

    top = view(i0, j0) * (1 - fj) + view(i0, j0 + 1) * fj
    bottom = view(i0 + 1, j0) * (1 - fj) + view(i0 + 1, j0 + 1) * fj
    return top * (1 - fi) + bottom * fi


def _lbp_offsets(params: LbpParams) -> list[tuple[float, float]]:
    if params.neighbors == 8 and params.radius == 1:
        return [(float(a), float(b)) for a, b in _LBP8_OFFSETS]
    out = []
    for p in range(params.neighbors):
        angle = 2 * math.pi * p / params.neighbors
        di = -params.radius * math.sin(angle)
        dj = params.radius * math.cos(angle)
        # snap trig round-off so axis-aligned samples read exact pixels
        di = round(di) if abs(di - round(di)) < 1e-9 else di
        dj = round(dj) if abs(dj - round(dj)) < 1e-9 else dj
        out.append((di, dj))
    return out


def lbp_code_map(grid, params: LbpParams = LbpParams()) -> CodeMap:
    grid = as_grid(grid)
    h, w = grid.shape
    margin = math.ceil(params.radius) + 1
    padded = np.pad(grid, margin, mode="edge")
    codes = np.zeros((h, w), dtype=np.int64)
    for p, (di, dj) in enumerate(_lbp_offsets(params)):
        if float(di).is_integer() and float(dj).is_integer():
            a, b = int(di), int(dj)
            sample = padded[margin + a:margin + a + h, margin + b:margin + b + w]
        else:
            sample = _bilinear_sample(padded, margin, h, w, di, dj)
        codes |= (sample - grid >= 0).astype(np.int64) << p
    return CodeMap(codes, params.neighbors, None)


def fuse_directions(maps: Sequence[CodeMap]) -> np.ndarray:
    """Per-pixel mean of the direction code maps of one channel."""
    maps = list(maps)
    if not maps:
        raise FusionError("no code maps to fuse")
    shape = maps[0].codes.shape
    if any(m.codes.shape != shape for m in maps):
        raise FusionError(f"code map shapes differ: {[m.codes.shape for m in maps]}")
    tags = [m.direction for m in maps]
    if len(set(tags)) != len(tags):
        raise FusionError(f"code maps must come from distinct directions, got {tags}")
    total = np.zeros(shape, dtype=np.float64)
    for m in maps:
        total += m.codes
    return total / len(maps)


def fuse_channels(r_map, g_map, b_map) -> np.ndarray:
    """Per-pixel mean of three channel texture maps."""
    grids = [as_grid(m) for m in (r_map, g_map, b_map)]
    if not (grids[0].shape == grids[1].shape == grids[2].shape):
        raise FusionError(f"channel texture maps differ in shape: {[g.shape for g in grids]}")
    return (grids[0] + grids[1] + grids[2]) / 3.0


def colour_texture_map(channels: Iterable[np.ndarray], params: DbcParams = DbcParams()) -> np.ndarray:
    r, g, b = (fuse_directions(dbc_code_maps(c, params)) for c in channels)
    return fuse_channels(r, g, b)
