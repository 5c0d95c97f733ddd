"""Retrieval benchmark: precision/recall at K, rank-window precision per query
and per class, nearest-neighbour confusion matrix and timing."""

from __future__ import annotations

import csv
import io
import json
import time
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ReportError
from .retrieval import distances_to, metric_name, rank


@dataclass(frozen=True)
class EvalConfig:
    k: int = 20
    metric: str = "l2"
    rank_window: int = 100
    include_self: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"K must be >= 1, got {self.k}")
        if self.rank_window < 1:
            raise ValueError(f"rank window must be >= 1, got {self.rank_window}")
        object.__setattr__(self, "metric", metric_name(self.metric))


def label_sort_key(label: str):
    return (0, int(label), "") if label.lstrip("-").isdigit() else (1, 0, label)


def precision_recall_at_k(ranked, query_label: str, labels: dict, k: int,
                          total_relevant: int) -> tuple[float, float]:
    """Precision and recall of the first ``k`` ranked ids.

    Precision always divides by ``k``, even when fewer than ``k`` results exist.
    """
    top = list(ranked.ids[:k])
    hits = sum(1 for i in top if labels[i] == query_label)
    recall = hits / total_relevant if total_relevant > 0 else 0.0
    return hits / k, recall


def avg_precision_eq23(ranked, query_label: str, labels: dict, window: int = 100) -> float:
    """Share of the first ``window`` ranks held by the query's class, over ``window``."""
    top = ranked.ids[:window]
    return sum(1 for i in top if labels[i] == query_label) / window


def class_avg_precision(values, label: str = "?") -> float:
    values = list(values)
    if not values:
        raise ReportError(f"class {label!r} has no query results")
    return float(np.mean(values))


def distance_rows(index, metric: str):
    """Yield ``(position, distances to every entry)`` for each indexed vector."""
    vectors = index.vectors
    for pos in range(len(index)):
        yield pos, distances_to(vectors[pos], vectors, metric)


def confusion_from_predictions(true_labels, predicted, classes) -> np.ndarray:
    pos = {c: n for n, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)))
    for t, p in zip(true_labels, predicted):
        counts[pos[t], pos[p]] += 1
    rows = counts.sum(axis=1, keepdims=True)
    return np.divide(counts * 100.0, rows, out=np.zeros_like(counts), where=rows > 0)


def nearest_other(ids, dists, pos: int) -> int:
    """Position of the nearest entry other than ``pos`` (ties to the lower id)."""
    ids = np.asarray(ids)
    mask = np.ones(len(ids), dtype=bool)
    mask[pos] = False
    cand = np.flatnonzero(mask)
    order = np.lexsort((ids[cand], dists[cand]))
    return int(cand[order[0]])


def confusion_matrix(index, metric: str = "l2") -> tuple[list[str], np.ndarray]:
    """Top-1 nearest-neighbour classification of every entry, self excluded.

    Returns the class order and a matrix whose row ``t`` gives the percentage
    of class-``t`` queries assigned to each class.
    """
    classes = sorted(set(index.labels), key=label_sort_key)
    if len(classes) < 2:
        raise ReportError("confusion matrix needs at least two classes")
    predicted = [index.labels[nearest_other(index.ids, d, pos)]
                 for pos, d in distance_rows(index, metric_name(metric))]
    return classes, confusion_from_predictions(index.labels, predicted, classes)


@dataclass
class QueryResult:
    id: int
    path: str
    label: str
    precision: float
    recall: float
    avg_precision: float
    predicted: str | None


@dataclass
class ClassSummary:
    label: str
    size: int
    precision: float
    recall: float
    avg_precision: float
    retrieval_rate: float | None


@dataclass
class EvalReport:
    config: EvalConfig
    fingerprint: str
    classes: list[ClassSummary]
    queries: list[QueryResult]
    precision: float
    recall: float
    avg_precision: float
    retrieval_rate: float | None
    confusion_classes: list[str]
    confusion: list[list[float]]
    notes: list[str] = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> dict:
        d = asdict(self)
        if not include_timing:
            d.pop("timing")
        return d

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True)

    def queries_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "path", "label", f"precision@{self.config.k}",
                    f"recall@{self.config.k}", "avg_precision", "predicted"])
        for q in self.queries:
            w.writerow([q.id, q.path, q.label, repr(q.precision), repr(q.recall),
                        repr(q.avg_precision), q.predicted if q.predicted is not None else ""])
        return buf.getvalue()

    def render_text(self) -> str:
        k = self.config.k
        lines = [f"metric: {self.config.metric}   K={k}   rank window={self.config.rank_window}"
                 f"   include_self={self.config.include_self}",
                 f"fingerprint: {self.fingerprint}", ""]
        width = max([5] + [len(c.label) for c in self.classes])
        lines.append(f"{'class':<{width}}  {'size':>5}  {'P@' + str(k):>7}  {'R@' + str(k):>7}  {'P_t':>7}")
        for c in self.classes:
            lines.append(f"{c.label:<{width}}  {c.size:>5}  {c.precision:>7.4f}  {c.recall:>7.4f}"
                         f"  {c.avg_precision:>7.4f}")
        lines.append(f"{'mean':<{width}}  {sum(c.size for c in self.classes):>5}  {self.precision:>7.4f}"
                     f"  {self.recall:>7.4f}  {self.avg_precision:>7.4f}")
        if self.confusion_classes:
            lines += ["", "confusion matrix (% of row class predicted as column class)"]
            cw = max([4] + [len(c) for c in self.confusion_classes])
            lines.append(" " * (width + 2) + " ".join(f"{c:>{cw}}" for c in self.confusion_classes))
            for c, row in zip(self.confusion_classes, self.confusion):
                cells = " ".join(f"{round(v):>{cw}d}" if v else f"{'':>{cw}}" for v in row)
                lines.append(f"{c:<{width}}  {cells}")
            lines.append(f"retrieval rate: {self.retrieval_rate:.1f}%")
        if "seconds_per_100_queries" in self.timing:
            lines.append(f"time per 100 queries: {self.timing['seconds_per_100_queries']:.3f} s")
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def run_benchmark(index, config: EvalConfig = EvalConfig()) -> EvalReport:
    """Query every indexed image against the index and collect all metrics."""
    n = len(index)
    if n == 0:
        raise ReportError("cannot benchmark an empty index")
    ids = np.asarray(index.ids)
    labels = index.label_of
    sizes = Counter(index.labels)
    classes = sorted(sizes, key=label_sort_key)
    can_classify = n >= 2
    notes = []
    singletons = [c for c in classes if sizes[c] == 1]
    if singletons:
        notes.append(f"classes with a single image (no same-class neighbour possible): {singletons}")
    if len(classes) < 2:
        notes.append("single-class index: confusion matrix and retrieval rate omitted")

    results = []
    start = time.perf_counter()
    for pos, dists in distance_rows(index, config.metric):
        qid, label = int(ids[pos]), index.labels[pos]
        if config.include_self:
            ranked = rank(ids, dists, query=qid)
            relevant = sizes[label]
        else:
            keep = np.arange(n) != pos
            ranked = rank(ids[keep], dists[keep], query=qid)
            relevant = sizes[label] - 1
        p, r = precision_recall_at_k(ranked, label, labels, config.k, relevant)
        ap = avg_precision_eq23(ranked, label, labels, config.rank_window)
        predicted = index.labels[nearest_other(ids, dists, pos)] if can_classify else None
        results.append(QueryResult(qid, index.paths[pos], label, p, r, ap, predicted))
    elapsed = time.perf_counter() - start

    confusion_classes, confusion, rates = [], [], {}
    if len(classes) >= 2:
        matrix = confusion_from_predictions(
            [q.label for q in results], [q.predicted for q in results], classes)
        confusion_classes = classes
        confusion = matrix.tolist()
        rates = {c: float(matrix[t, t]) for t, c in enumerate(classes)}

    summaries = []
    for c in classes:
        mine = [q for q in results if q.label == c]
        summaries.append(ClassSummary(
            c, sizes[c],
            float(np.mean([q.precision for q in mine])),
            float(np.mean([q.recall for q in mine])),
            class_avg_precision([q.avg_precision for q in mine], c),
            rates.get(c)))

    return EvalReport(
        config=config,
        fingerprint=index.fingerprint.hex(),
        classes=summaries,
        queries=results,
        precision=float(np.mean([q.precision for q in results])),
        recall=float(np.mean([q.recall for q in results])),
        avg_precision=float(np.mean([q.avg_precision for q in results])),
        retrieval_rate=float(np.mean(list(rates.values()))) if rates else None,
        confusion_classes=confusion_classes,
        confusion=confusion,
        notes=notes,
        timing={"seconds": elapsed, "queries": n, "seconds_per_100_queries": elapsed * 100.0 / n},
    )


def metric_comparison(reports) -> str:
    """One column per metric: mean precision@K, retrieval rate and time per 100 queries."""
    names = [r.config.metric for r in reports]
    k = reports[0].config.k if reports else 20
    rows = [
        (f"average precision@{k}", [f"{r.precision:.4f}" for r in reports]),
        ("average retrieval rate (%)",
         [f"{r.retrieval_rate:.1f}" if r.retrieval_rate is not None else "-" for r in reports]),
        ("seconds / 100 queries", [f"{r.timing['seconds_per_100_queries']:.3f}" for r in reports]),
    ]
    width = max(len(label) for label, _ in rows)
    lines = [f"{'':<{width}}  " + "  ".join(f"{m:>9}" for m in names)]
    for label, cells in rows:
        lines.append(f"{label:<{width}}  " + "  ".join(f"{c:>9}" for c in cells))
    return "\n".join(lines) + "\n"
