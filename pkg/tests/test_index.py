import numpy as np
import pytest

from dbcr.errors import (ComparabilityError, FingerprintError, IndexFormatError, MagicError,
                         TruncatedIndexError, VersionError)
from dbcr.index import FeatureIndex, dumps_index, load_index, loads_index, save_index
from dbcr.pipeline import FeatureVector
from dbcr.retrieval import knn

FP = bytes(range(32))


def three_entry(rng):
    idx = FeatureIndex(FP, 5)
    for i, label in enumerate(["a", "b", "ünï"]):
        idx.add(10 + i, f"/data/{label}/{i}.ppm", label, FeatureVector(rng.normal(size=5), FP))
    return idx


def test_layout_bytes():
    idx = FeatureIndex(FP, 2)
    idx.add(7, "p", "lb", np.array([1.0, -2.5]))
    raw = dumps_index(idx)
    expected = (b"DBCR" + (1).to_bytes(2, "little") + FP + (2).to_bytes(4, "little")
                + (1).to_bytes(4, "little") + (7).to_bytes(4, "little")
                + (1).to_bytes(2, "little") + b"p" + (2).to_bytes(2, "little") + b"lb"
                + np.array([1.0, -2.5], dtype="<f4").tobytes())
    assert raw == expected


def test_round_trip_bit_exact(tmp_path, rng):
    idx = three_entry(rng)
    path = tmp_path / "x.dbcr"
    save_index(idx, path)
    back = load_index(path)
    assert back.fingerprint == FP and back.dim == 5
    assert back.ids == idx.ids and back.paths == idx.paths and back.labels == idx.labels
    assert back.vectors.tobytes() == idx.vectors.tobytes()
    assert dumps_index(back) == path.read_bytes()


def test_bad_magic(rng):
    raw = bytearray(dumps_index(three_entry(rng)))
    raw[:4] = b"NOPE"
    with pytest.raises(MagicError):
        loads_index(bytes(raw))


def test_bad_version(rng):
    raw = bytearray(dumps_index(three_entry(rng)))
    raw[4:6] = (2).to_bytes(2, "little")
    with pytest.raises(VersionError):
        loads_index(bytes(raw))


@pytest.mark.parametrize("cut", [10, 50, -1])
def test_truncated(rng, cut):
    raw = dumps_index(three_entry(rng))
    with pytest.raises(TruncatedIndexError):
        loads_index(raw[:cut])


def test_trailing_garbage(rng):
    with pytest.raises(IndexFormatError):
        loads_index(dumps_index(three_entry(rng)) + b"\x00")


def test_invalid_utf8_label():
    idx = FeatureIndex(FP, 1)
    idx.add(1, "p", "xy", np.zeros(1))
    raw = dumps_index(idx).replace(b"xy", b"\xff\xfe")
    with pytest.raises(IndexFormatError, match="UTF-8"):
        loads_index(raw)


def test_expected_fingerprint(rng):
    raw = dumps_index(three_entry(rng))
    with pytest.raises(FingerprintError):
        loads_index(raw, expected_fingerprint=bytes(32))


def test_query_with_other_fingerprint(rng, tmp_path):
    save_index(three_entry(rng), tmp_path / "i")
    idx = load_index(tmp_path / "i")
    with pytest.raises(ComparabilityError):
        knn(FeatureVector(np.zeros(5), bytes(32)), idx, 1)


def test_add_validation(rng):
    idx = three_entry(rng)
    with pytest.raises(ValueError):
        idx.add(10, "dup", "a", np.zeros(5))
    with pytest.raises(ComparabilityError):
        idx.add(99, "short", "a", np.zeros(4))
    with pytest.raises(ValueError):
        idx.add(98, "nan", "a", np.full(5, np.nan))


def test_float32_query_self_distance_zero(rng):
    idx = FeatureIndex(FP, 50)
    vecs = [FeatureVector(rng.random(50), FP) for _ in range(4)]
    for i, v in enumerate(vecs):
        idx.add(i, str(i), "c", v)
    for i, v in enumerate(vecs):
        for metric in ("l1", "l2", "canberra", "chi2"):
            r = knn(v, idx, 1, metric)
            assert r.ids[0] == i and r.distances[0] == 0.0
