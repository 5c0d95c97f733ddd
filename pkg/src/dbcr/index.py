"""Persistent feature index.

File layout, all integers little-endian::

    b"DBCR" | u16 version | 32-byte fingerprint | u32 dim | u32 count
    count x ( u32 id | u16 len | path utf-8 | u16 len | label utf-8 | dim x f32 )
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (ComparabilityError, FingerprintError, IndexFormatError, MagicError,
                     TruncatedIndexError, VersionError)

MAGIC = b"DBCR"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sH32sII")
_U32 = struct.Struct("<I")
_U16 = struct.Struct("<H")
_F32 = np.dtype("<f4")


@dataclass(frozen=True)
class IndexEntry:
    id: int
    path: str
    label: str
    vector: np.ndarray


@dataclass
class FeatureIndex:
    fingerprint: bytes
    dim: int
    ids: list[int] = field(default_factory=list)
    paths: list[str] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    _rows: list[np.ndarray] = field(default_factory=list, repr=False)
    _matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.fingerprint) != 32:
            raise ValueError(f"fingerprint must be 32 bytes, got {len(self.fingerprint)}")
        self._id_set = set(self.ids)

    def __len__(self):
        return len(self.ids)

    @property
    def vectors(self) -> np.ndarray:
        """All stored vectors as a ``(count, dim)`` float32 matrix."""
        if self._matrix is None or len(self._matrix) != len(self._rows):
            if self._rows:
                self._matrix = np.stack(self._rows)
            else:
                self._matrix = np.zeros((0, self.dim), dtype=np.float32)
        return self._matrix

    @property
    def entries(self) -> list[IndexEntry]:
        return [IndexEntry(i, p, l, v)
                for i, p, l, v in zip(self.ids, self.paths, self.labels, self.vectors)]

    @property
    def label_of(self) -> dict[int, str]:
        return dict(zip(self.ids, self.labels))

    def narrow(self, vector) -> np.ndarray:
        """Values as stored on disk (float32), so queries compare like entries."""
        return np.asarray(getattr(vector, "values", vector), dtype=np.float64).astype(np.float32)

    def check_query(self, vector) -> None:
        fp = getattr(vector, "fingerprint", None)
        if fp is not None and fp != self.fingerprint:
            raise ComparabilityError(
                f"query fingerprint {fp.hex()} does not match index fingerprint {self.fingerprint.hex()}")
        n = len(getattr(vector, "values", vector))
        if n != self.dim:
            raise ComparabilityError(f"query has dimension {n}, index expects {self.dim}")

    def add(self, entry_id: int, path: str, label: str, vector) -> None:
        self.check_query(vector)
        if entry_id in self._id_set:
            raise ValueError(f"duplicate entry id {entry_id}")
        if not 0 <= entry_id < 2 ** 32:
            raise ValueError(f"entry id out of u32 range: {entry_id}")
        values = self.narrow(vector)
        if not np.all(np.isfinite(values)):
            raise ValueError(f"entry {entry_id} has non-finite values")
        self._id_set.add(entry_id)
        self.ids.append(int(entry_id))
        self.paths.append(str(path))
        self.labels.append(str(label))
        self._rows.append(values)


def _encode_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"string too long for index ({len(raw)} bytes): {s[:40]}...")
    return _U16.pack(len(raw)) + raw


def dumps_index(index: FeatureIndex) -> bytes:
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, index.fingerprint, index.dim, len(index))]
    for i, p, l, v in zip(index.ids, index.paths, index.labels, index.vectors):
        parts.append(_U32.pack(i))
        parts.append(_encode_str(p))
        parts.append(_encode_str(l))
        parts.append(np.asarray(v, dtype=_F32).tobytes())
    return b"".join(parts)


def loads_index(data: bytes, expected_fingerprint: bytes | None = None) -> FeatureIndex:
    if len(data) < 4 or data[:4] != MAGIC:
        raise MagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < _HEADER.size:
        raise TruncatedIndexError(f"header needs {_HEADER.size} bytes, file has {len(data)}")
    _, version, fingerprint, dim, count = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported index version {version}, expected {FORMAT_VERSION}")
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise FingerprintError(
            f"index fingerprint {fingerprint.hex()} does not match expected {expected_fingerprint.hex()}")

    pos = _HEADER.size
    vec_bytes = dim * 4

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise TruncatedIndexError(f"truncated while reading {what} at byte {pos}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    def text(what: str) -> str:
        start = pos
        raw = take(_U16.unpack(take(2, f"{what} length"))[0], what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise IndexFormatError(f"{what} at byte {start} is not valid UTF-8") from None

    index = FeatureIndex(fingerprint, dim)
    for k in range(count):
        (entry_id,) = _U32.unpack(take(4, f"entry {k} id"))
        path = text("path")
        label = text("label")
        values = np.frombuffer(take(vec_bytes, f"entry {k} vector"), dtype=_F32).astype(np.float32)
        if entry_id in index._id_set:
            raise IndexFormatError(f"duplicate entry id {entry_id} in index")
        index._id_set.add(entry_id)
        index.ids.append(entry_id)
        index.paths.append(path)
        index.labels.append(label)
        index._rows.append(values)
    if pos != len(data):
        raise IndexFormatError(f"{len(data) - pos} trailing bytes after {count} entries")
    return index


def save_index(index: FeatureIndex, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(dumps_index(index))
    os.replace(tmp, path)


def load_index(path, expected_fingerprint: bytes | None = None) -> FeatureIndex:
    with open(path, "rb") as fh:
        return loads_index(fh.read(), expected_fingerprint)
