"""Single-level 2-D Haar decomposition (averaging normalisation)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import as_grid

BAND_NAMES = ("ll", "lh", "hl", "hh")


@dataclass(frozen=True)
class SubBands:
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    source_width: int
    source_height: int

    def __iter__(self):
        return iter((self.ll, self.lh, self.hl, self.hh))


def _pad_even(grid: np.ndarray) -> np.ndarray:
    h, w = grid.shape
    if h % 2 == 0 and w % 2 == 0:
        return grid
    return np.pad(grid, ((0, h % 2), (0, w % 2)), mode="edge")


def haar_decompose(grid) -> SubBands:
    """Split a grid into approximation and detail bands over 2x2 blocks.

    For a block ``[[a, b], [c, d]]``::

        ll = (a + b + c + d) / 4     lh = (a - b + c - d) / 4
        hl = (a + b - c - d) / 4     hh = (a - b - c + d) / 4

    Odd dimensions are edge-replicated to even first.
    """
    grid = as_grid(grid)
    h, w = grid.shape
    x = _pad_even(grid)
    a = x[0::2, 0::2]
    b = x[0::2, 1::2]
    c = x[1::2, 0::2]
    d = x[1::2, 1::2]
    ll = (a + b + c + d) / 4
    lh = ((a - b) + (c - d)) / 4
    hl = ((a + b) - (c + d)) / 4
    hh = ((a - b) - (c - d)) / 4
    return SubBands(ll, lh, hl, hh, w, h)


def haar_reconstruct(bands: SubBands) -> np.ndarray:
    ll, lh, hl, hh = (np.asarray(band, dtype=np.float64) for band in bands)
    bh, bw = ll.shape
    out = np.empty((2 * bh, 2 * bw), dtype=np.float64)
    out[0::2, 0::2] = ll + lh + hl + hh
    out[0::2, 1::2] = ll - lh + hl - hh
    out[1::2, 0::2] = ll + lh - hl - hh
    out[1::2, 1::2] = ll - lh - hl + hh
    return out[:bands.source_height, :bands.source_width]
