"""Acceptance suite: one test per release criterion.

Each test carries a ``criterion`` marker; the conftest hook prints one
PASS/FAIL/SKIP line per criterion at the end of the run. Run it alone with

    pytest tests/test_acceptance.py -v

or ``python tests/test_acceptance.py``.
"""

import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pytest

import oracles
from dbcr.cli import main
from dbcr.evaluation import EvalConfig, avg_precision_eq23, class_avg_precision, run_benchmark
from dbcr.haar import haar_decompose, haar_reconstruct
from dbcr.hog import HogParams, cell_histograms, gradients, hog, magnitude_orientation
from dbcr.index import FeatureIndex, save_index
from dbcr.pipeline import DescriptorConfig, describe_path, feature_dim
from dbcr.retrieval import METRICS, distance, ingest, knn, rank
from dbcr.texture import DIRECTIONS, DbcParams, dbc_code_map, lbp_code_map
from synthetic import write_dataset

criterion = pytest.mark.criterion


def build_index(root, layout="classdirs", config=DescriptorConfig()):
    items = ingest(root, layout)
    with ThreadPoolExecutor(max_workers=os.cpu_count() or 1) as pool:
        vectors = list(pool.map(lambda item: describe_path(item[0], config), items))
    index = FeatureIndex(config.fingerprint, feature_dim(config))
    for n, ((path, label), v) in enumerate(zip(items, vectors)):
        index.add(n, path, label, v)
    return index


@pytest.fixture(scope="module")
def synthetic_index(synthetic_dir):
    return build_index(synthetic_dir)


def random_grids(seed, count=200, size=12):
    rng = np.random.default_rng(seed)
    for n in range(count):
        # small integer ranges force many exact ties (the >= 0 branch); every
        # fourth grid is continuous-valued instead
        if n % 4 == 3:
            yield rng.normal(0, 40, (size, size))
        else:
            yield rng.integers(0, 1 + n % 7, (size, size)).astype(float)


@criterion("DBC oracle equivalence")
def test_dbc_oracle(detail):
    grids = list(random_grids(1))
    mismatches, elapsed = 0, 0.0
    for g in grids:
        rows = g.tolist()
        for d in (1, 2):
            for alpha in DIRECTIONS:
                t0 = time.perf_counter()
                codes = dbc_code_map(g, alpha, DbcParams(d)).codes
                elapsed += time.perf_counter() - t0
                want = np.array(oracles.dbc_map(rows, alpha, d))
                mismatches += int(np.count_nonzero(codes != want))
    detail(f"{mismatches} mismatches over {len(grids) * 8} maps, {elapsed:.2f} s")
    assert mismatches == 0
    assert elapsed < 5.0


@criterion("LBP oracle equivalence")
def test_lbp_oracle(detail):
    grids = list(random_grids(2))
    mismatches, elapsed = 0, 0.0
    for g in grids:
        t0 = time.perf_counter()
        codes = lbp_code_map(g).codes
        elapsed += time.perf_counter() - t0
        mismatches += int(np.count_nonzero(codes != np.array(oracles.lbp8_map(g.tolist()))))
    detail(f"{mismatches} mismatches over {len(grids)} maps, {elapsed:.2f} s")
    assert mismatches == 0
    assert elapsed < 5.0


@criterion("Haar perfect reconstruction")
def test_haar_reconstruction(detail):
    rng = np.random.default_rng(3)
    worst, odd = 0.0, 0
    for _ in range(100):
        h, w = rng.integers(1, 40, 2)
        odd += bool(h % 2 or w % 2)
        x = rng.normal(0, 100, (h, w))
        back = haar_reconstruct(haar_decompose(x))
        assert back.shape == x.shape
        worst = max(worst, float(np.max(np.abs(back - x))))
    for shape in [(8, 8), (7, 5), (1, 1), (3, 10)]:
        bands = haar_decompose(np.full(shape, 37.25))
        for band in (bands.lh, bands.hl, bands.hh):
            assert np.all(band == 0.0)
    detail(f"max error {worst:.2e}, {odd} of 100 grids had an odd side")
    assert odd > 0
    assert worst <= 1e-9


@criterion("HOG mass conservation and offset invariance")
def test_hog_mass(detail):
    rng = np.random.default_rng(4)
    params = HogParams()
    worst = 0.0
    for n in range(30):
        h, w = rng.integers(16, 70, 2)
        g = rng.integers(0, 256, (h, w)).astype(float) if n % 2 else rng.normal(0, 60, (h, w))
        mag, theta = magnitude_orientation(*gradients(g))
        cells = cell_histograms(mag, theta, params)
        cy, cx, _ = cells.shape
        c = params.cell_size
        per_cell = mag[:cy * c, :cx * c].reshape(cy, c, cx, c).sum(axis=(1, 3))
        rel = np.abs(cells.sum(axis=-1) - per_cell) / np.maximum(per_cell, 1e-300)
        worst = max(worst, float(rel[per_cell > 0].max()))
    for n in range(10):
        g = rng.integers(0, 200, (48, 40)).astype(float)
        shift = float(rng.integers(-100, 100))
        assert hog(g).values.tobytes() == hog(g + shift).values.tobytes()
    detail(f"max relative mass error {worst:.2e}")
    assert worst <= 1e-6


@criterion("Metric axioms")
def test_metric_axioms(detail):
    rng = np.random.default_rng(5)
    triples = 10_000
    tol = 1e-9
    for n in range(triples):
        dim = 1 + n % 12
        x, y, z = rng.normal(0, 10, (3, dim))
        for m in ("l1", "l2"):
            dxy, dyx = distance(x, y, m), distance(y, x, m)
            assert dxy >= 0 and dxy == dyx
            assert distance(x, x, m) == 0
            if dxy == 0:
                assert np.array_equal(x, y)
            assert distance(x, z, m) <= dxy + distance(y, z, m) + tol * (1 + dxy)
        # non-negative data with shared zeros exercises the zero-denominator rule
        p, q = rng.integers(0, 4, (2, dim)).astype(float) * rng.random((2, dim))
        q[p == 0] = np.where(rng.random(int((p == 0).sum())) < 0.5, 0.0, q[p == 0])
        for m, ref in (("canberra", oracles.canberra), ("chi2", oracles.chi2)):
            dpq = distance(p, q, m)
            assert np.isfinite(dpq) and dpq >= 0
            assert dpq == distance(q, p, m)
            assert distance(p, p, m) == 0
            assert dpq == pytest.approx(ref(p.tolist(), q.tolist()), rel=1e-12, abs=1e-15)
    assert distance([0.0, 1.0], [0.0, 3.0], "canberra") == 0.5
    assert distance([0.0, 1.0], [0.0, 3.0], "chi2") == 1.0
    assert distance([0.0], [0.0], "canberra") == 0.0
    detail(f"{triples} triples")


@criterion("Self-retrieval")
def test_self_retrieval(synthetic_index, detail):
    index = synthetic_index
    assert len(index) == 30
    failures = 0
    for metric in METRICS:
        for pos, entry_id in enumerate(index.ids):
            query = index.vectors[pos].astype(np.float64)
            ranked = knn(query, index, 1, metric)
            if not (ranked.ids[0] == entry_id and ranked.distances[0] == 0.0):
                failures += 1
    detail(f"{failures} failures over 30 images x {len(METRICS)} metrics")
    assert failures == 0


# Ten images at positions on a line, two classes; the distance between two
# images is the gap between their positions.
LINE = [(0.0, "a"), (1.0, "a"), (2.5, "a"), (4.0, "a"), (9.0, "a"),
        (3.0, "b"), (6.0, "b"), (7.5, "b"), (8.0, "b"), (10.0, "b")]


@criterion("Rank-window precision oracle")
def test_rank_window_oracle(detail):
    ids = list(range(len(LINE)))
    labels = {i: lab for i, (_, lab) in enumerate(LINE)}
    checked = 0
    for window in (1, 2, 3, 4, 5, 7, 10, 100):
        per_class = {"a": [], "b": []}
        for i, (xi, lab) in enumerate(LINE):
            table = [abs(xi - xj) for xj, _ in LINE]
            hits = oracles.count_window_hits(oracles.full_sort(ids, table), labels, lab, window)
            got = avg_precision_eq23(rank(ids, table), lab, labels, window)
            assert got == hits / window
            per_class[lab].append(got)
            checked += 1
        for lab, values in per_class.items():
            want = sum(values) / len(values)
            assert class_avg_precision(values, lab) == want
    detail(f"{checked} query/window pairs")


@criterion("Synthetic end-to-end separability")
def test_synthetic_end_to_end(tmp_path, detail):
    t0 = time.perf_counter()
    write_dataset(tmp_path, per_class=10, seed=11)
    index = build_index(tmp_path)
    report = run_benchmark(index, EvalConfig(k=9))
    elapsed = time.perf_counter() - t0
    diagonal = [row[n] for n, row in enumerate(report.confusion)]
    detail(f"precision@9 {report.precision:.3f}, diagonal {diagonal}, {elapsed:.1f} s")
    assert report.precision >= 0.9
    assert min(diagonal) >= 80
    assert elapsed < 60


PAPER = {"avg_precision": 0.78, "retrieval_rate": 84.0, "dinosaur": 0.98}


@pytest.mark.wang
@criterion("Wang Corel paper-scale reproduction")
def test_wang(detail):
    root = os.environ.get("DBCR_WANG_DIR")
    if not root or not Path(root).is_dir():
        pytest.skip("Wang Corel images not available; set DBCR_WANG_DIR to run")
    t0 = time.perf_counter()
    index = build_index(root, layout="wang")
    build_s = time.perf_counter() - t0
    reports = {m: run_benchmark(index, EvalConfig(k=20, metric=m)) for m in METRICS}
    l2 = reports["l2"]
    by_class = {c.label: c.precision for c in l2.classes}
    top_class = max(by_class, key=by_class.get)
    order = sorted(METRICS, key=lambda m: -reports[m].precision)
    summary = (f"index {build_s:.0f} s; P@20 l2 {l2.precision:.3f} (published {PAPER['avg_precision']}); "
               f"retrieval rate {l2.retrieval_rate:.1f}% (published {PAPER['retrieval_rate']:.0f}%); "
               f"dinosaur {by_class.get('4', float('nan')):.3f} (published {PAPER['dinosaur']}); "
               "metrics " + ", ".join(f"{m} {reports[m].precision:.3f}" for m in order))
    detail(summary)
    print(summary)
    assert top_class == "4"
    assert l2.precision >= 0.55
    assert "l2" in order[:2]


@criterion("Determinism")
def test_determinism(synthetic_index, tmp_path, detail):
    path = tmp_path / "syn.dbcr"
    save_index(synthetic_index, path)
    runs = []
    for n in range(2):
        prefix = tmp_path / f"run{n}"
        code = main(["evaluate", str(path), "--all-metrics", "--report", str(prefix)],
                    io.StringIO(), io.StringIO())
        assert code == 0
        docs = {}
        for m in METRICS:
            doc = json.loads((tmp_path / f"run{n}.{m}.json").read_text())
            doc.pop("timing")
            docs[m] = json.dumps(doc, sort_keys=True)
        runs.append(docs)
    assert runs[0] == runs[1]
    detail(f"{len(METRICS)} metric reports identical across two runs")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
