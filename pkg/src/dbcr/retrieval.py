"""Distances, exhaustive k-nearest ranking and dataset ingestion."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ComparabilityError, IngestionError

METRICS = ("l1", "l2", "canberra", "chi2")
_ALIASES = {
    "l1": "l1", "manhattan": "l1", "cityblock": "l1",
    "l2": "l2", "euclidean": "l2",
    "canberra": "canberra",
    "chi2": "chi2", "chisquare": "chi2", "chi-square": "chi2", "chi_square": "chi2",
}

IMAGE_SUFFIXES = {".ppm", ".pgm", ".pnm", ".jpg", ".jpeg", ".png", ".bmp", ".tif", ".tiff"}
LAYOUTS = ("classdirs", "wang")

# rows converted to float64 per step when scanning an index
_CHUNK = 256


def metric_name(metric: str) -> str:
    try:
        return _ALIASES[metric.lower()]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}") from None


def _values(v) -> np.ndarray:
    return np.asarray(getattr(v, "values", v), dtype=np.float64)


def check_comparable(a, b) -> None:
    fa, fb = getattr(a, "fingerprint", None), getattr(b, "fingerprint", None)
    if fa is not None and fb is not None and fa != fb:
        raise ComparabilityError(f"fingerprint mismatch: {fa.hex()} vs {fb.hex()}")
    la, lb = len(_values(a)), len(_values(b))
    if la != lb:
        raise ComparabilityError(f"dimension mismatch: {la} vs {lb}")


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den != 0)
    return out


def pairwise_rows(query: np.ndarray, rows: np.ndarray, metric: str) -> np.ndarray:
    """Distances from one query vector to every row of ``rows`` (both float64)."""
    diff = rows - query
    if metric == "l1":
        return np.abs(diff).sum(axis=-1)
    if metric == "l2":
        return np.sqrt((diff * diff).sum(axis=-1))
    if metric == "canberra":
        return _safe_ratio(np.abs(diff), np.abs(rows) + np.abs(query)).sum(axis=-1)
    if metric == "chi2":
        return _safe_ratio(diff * diff, rows + query).sum(axis=-1)
    raise ValueError(f"unknown metric {metric!r}")


def distance(a, b, metric: str = "l2") -> float:
    """Distance between two feature vectors.

    Canberra and chi-square terms whose denominator is zero contribute 0.
    """
    check_comparable(a, b)
    return float(pairwise_rows(_values(a), _values(b)[None, :], metric_name(metric))[0])


def distances_to(query, matrix, metric: str = "l2") -> np.ndarray:
    """Distances from ``query`` to each row of a (possibly float32) matrix."""
    metric = metric_name(metric)
    q = _values(query)
    out = np.empty(len(matrix))
    for start in range(0, len(matrix), _CHUNK):
        rows = np.asarray(matrix[start:start + _CHUNK], dtype=np.float64)
        out[start:start + len(rows)] = pairwise_rows(q, rows, metric)
    return out


@dataclass(frozen=True)
class RankedList:
    query: object
    ids: np.ndarray
    distances: np.ndarray

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        return zip(self.ids.tolist(), self.distances.tolist())


def rank(ids, dists, k: int | None = None, query=None) -> RankedList:
    """Sort by ascending distance, ties broken by ascending id."""
    ids = np.asarray(ids)
    dists = np.asarray(dists, dtype=np.float64)
    order = np.lexsort((ids, dists))
    if k is not None:
        order = order[:k]
    return RankedList(query, ids[order], dists[order])


def knn(query, index, k: int = 20, metric: str = "l2") -> RankedList:
    """Exhaustive k-nearest search over a :class:`~dbcr.index.FeatureIndex`."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    index.check_query(query)
    if len(index) == 0:
        return RankedList(query, np.zeros(0, dtype=np.int64), np.zeros(0))
    q = index.narrow(query)
    return rank(index.ids, distances_to(q, index.vectors, metric), k, query)


def ingest(root, layout: str = "classdirs") -> list[tuple[str, str]]:
    """List ``(path, label)`` pairs for every image under ``root``.

    ``classdirs`` labels a file by its parent directory name; ``wang`` labels
    file ``n.ext`` as ``n // 100``.
    """
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}; choose from {LAYOUTS}")
    root = Path(root)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        raise IngestionError(f"cannot read dataset directory {root}")
    files = sorted(
        (p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.relative_to(root).as_posix())
    if layout == "classdirs":
        return [(str(p), p.parent.name) for p in files]
    out, bad = [], []
    for p in files:
        try:
            n = int(p.stem)
        except ValueError:
            bad.append(p)
            continue
        if n < 0:
            bad.append(p)
            continue
        out.append((str(p), str(n // 100)))
    if bad:
        raise IngestionError("non-numeric file names under wang layout", bad)
    return out
