"""Histogram of Oriented Gradients.

Gradients use central differences, orientations are voted into bins by
linear interpolation between the two nearest bin centres (bin ``k`` is
centred on ``k * range / bins`` degrees), and overlapping blocks of cells are
L1- or L2-normalised before concatenation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError
from .image import as_grid


@dataclass(frozen=True)
class HogParams:
    cell_size: int = 8
    block_size: int = 2
    block_stride: int = 1
    bin_count: int = 9
    signed: bool = False
    norm: str = "L2"
    epsilon: float = 1e-5

    def __post_init__(self):
        if self.cell_size < 2:
            raise ValueError(f"cell_size must be >= 2, got {self.cell_size}")
        if self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if not 1 <= self.block_stride <= self.block_size:
            raise ValueError(
                f"block_stride must lie in [1, block_size={self.block_size}], got {self.block_stride}")
        if self.bin_count < 2:
            raise ValueError(f"bin_count must be >= 2, got {self.bin_count}")
        norm = str(self.norm).upper()
        if norm not in ("L1", "L2"):
            raise ValueError(f"norm must be L1 or L2, got {self.norm!r}")
        object.__setattr__(self, "norm", norm)
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def angle_range(self) -> float:
        return 360.0 if self.signed else 180.0


@dataclass(frozen=True)
class HogVector:
    values: np.ndarray
    layout: tuple[int, int, int, int]  # blocks_x, blocks_y, cells per block, bins

    def __len__(self):
        return len(self.values)


def block_grid(width: int, height: int, params: HogParams) -> tuple[int, int]:
    """Number of blocks (x, y) that fit a ``width x height`` grid."""
    cells_x = width // params.cell_size
    cells_y = height // params.cell_size
    if cells_x < params.block_size or cells_y < params.block_size:
        raise DimensionError(
            f"{width}x{height} grid holds {cells_x}x{cells_y} cells of {params.cell_size}px; "
            f"a block needs {params.block_size}x{params.block_size}")
    return ((cells_x - params.block_size) // params.block_stride + 1,
            (cells_y - params.block_size) // params.block_stride + 1)


def hog_length(width: int, height: int, params: HogParams) -> int:
    bx, by = block_grid(width, height, params)
    return bx * by * params.block_size ** 2 * params.bin_count


def gradients(grid) -> tuple[np.ndarray, np.ndarray]:
    """Central differences ``gx = I(i, j+1) - I(i, j-1)``, ``gy = I(i+1, j) - I(i-1, j)``."""
    grid = as_grid(grid)
    h, w = grid.shape
    if h < 3 or w < 3:
        raise DimensionError(f"gradients need at least a 3x3 grid, got {w}x{h}")
    p = np.pad(grid, 1, mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return gx, gy


def magnitude_orientation(gx, gy, signed: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Gradient magnitude and orientation in degrees.

    Orientation lies in [0, 180) when unsigned and [0, 360) when signed; it is
    0 wherever the magnitude is 0.
    """
    gx = np.asarray(gx, dtype=np.float64)
    gy = np.asarray(gy, dtype=np.float64)
    if gx.shape != gy.shape:
        raise DimensionError(f"gradient shapes differ: {gx.shape} vs {gy.shape}")
    mag = np.sqrt(gx * gx + gy * gy)
    span = 360.0 if signed else 180.0
    theta = np.mod(np.degrees(np.arctan2(gy, gx)), span)
    theta[theta >= span] -= span
    theta[mag == 0] = 0.0
    return mag, theta


def cell_histograms(mag, theta, params: HogParams = HogParams()) -> np.ndarray:
    """Orientation histograms per cell, shape ``(cells_y, cells_x, bin_count)``.

    Trailing pixels that do not fill a whole cell are ignored.
    """
    mag = np.asarray(mag, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    cs, n = params.cell_size, params.bin_count
    cells_y, cells_x = mag.shape[0] // cs, mag.shape[1] // cs
    if cells_y < 1 or cells_x < 1:
        raise DimensionError(f"grid {mag.shape[1]}x{mag.shape[0]} smaller than one {cs}px cell")
    mag = mag[:cells_y * cs, :cells_x * cs]
    theta = theta[:cells_y * cs, :cells_x * cs]

    pos = theta / (params.angle_range / n)
    lo = np.floor(pos)
    frac = pos - lo
    lo = lo.astype(np.intp) % n
    hi = (lo + 1) % n

    rows = np.arange(cells_y * cs) // cs
    cols = np.arange(cells_x * cs) // cs
    cell = (rows[:, None] * cells_x + cols[None, :]) * n
    size = cells_y * cells_x * n
    hist = np.bincount((cell + lo).ravel(), (mag * (1.0 - frac)).ravel(), minlength=size)
    hist += np.bincount((cell + hi).ravel(), (mag * frac).ravel(), minlength=size)
    return hist.reshape(cells_y, cells_x, n)


def normalize_blocks(cells, params: HogParams = HogParams()) -> HogVector:
    cells = np.asarray(cells, dtype=np.float64)
    cells_y, cells_x, n = cells.shape
    bs, stride = params.block_size, params.block_stride
    if cells_y < bs or cells_x < bs:
        raise DimensionError(f"{cells_x}x{cells_y} cells cannot hold a {bs}x{bs} block")
    # (by, bx, n, bs, bs) -> (by, bx, bs, bs, n)
    win = sliding_window_view(cells, (bs, bs), axis=(0, 1))[::stride, ::stride]
    blocks = win.transpose(0, 1, 3, 4, 2)
    by, bx = blocks.shape[:2]
    v = blocks.reshape(by, bx, bs * bs * n)
    e = params.epsilon
    if params.norm == "L1":
        denom = np.abs(v).sum(axis=-1, keepdims=True) + e
    else:
        denom = np.sqrt((v * v).sum(axis=-1, keepdims=True) + e * e)
    return HogVector((v / denom).ravel(), (bx, by, bs * bs, n))


def hog(grid, params: HogParams = HogParams()) -> HogVector:
    grid = as_grid(grid)
    block_grid(grid.shape[1], grid.shape[0], params)
    gx, gy = gradients(grid)
    mag, theta = magnitude_orientation(gx, gy, params.signed)
    return normalize_blocks(cell_histograms(mag, theta, params), params)
