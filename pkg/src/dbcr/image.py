"""Raster decoding and the small set of pixel operations the pipeline needs.

A pixel grid is a 2-D ``float64`` array of shape ``(height, width)``.  Colour
images travel as :class:`RgbImage`, three grids of identical shape.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DecodeError, DimensionError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# Bilinear weights are snapped to multiples of 2**-11 so that integer inputs
# resize with exact float arithmetic (brightness shifts stay exact).
_WEIGHT_BITS = 11

_WHITESPACE = b" \t\n\r\v\f"


def as_grid(samples) -> np.ndarray:
    grid = np.asarray(samples, dtype=np.float64)
    if grid.ndim != 2 or grid.shape[0] < 1 or grid.shape[1] < 1:
        raise DimensionError(f"pixel grid must be a non-empty 2-D array, got shape {grid.shape}")
    return grid


@dataclass(frozen=True)
class RgbImage:
    r: np.ndarray
    g: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        r, g, b = (as_grid(c) for c in (self.r, self.g, self.b))
        if not (r.shape == g.shape == b.shape):
            raise DimensionError(
                f"channel shapes differ: r={r.shape} g={g.shape} b={b.shape}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "b", b)

    @property
    def width(self) -> int:
        return self.r.shape[1]

    @property
    def height(self) -> int:
        return self.r.shape[0]

    @property
    def channels(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.r, self.g, self.b

    @classmethod
    def from_gray(cls, grid) -> "RgbImage":
        grid = as_grid(grid)
        return cls(grid, grid.copy(), grid.copy())

    @classmethod
    def from_array(cls, array) -> "RgbImage":
        """Build from an ``(h, w, 3)`` array or a 2-D grayscale array."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 2:
            return cls.from_gray(array)
        if array.ndim != 3 or array.shape[2] != 3:
            raise DimensionError(f"expected (h, w, 3) array, got {array.shape}")
        return cls(array[:, :, 0], array[:, :, 1], array[:, :, 2])

    def to_array(self) -> np.ndarray:
        return np.stack(self.channels, axis=-1)

    def map(self, fn) -> "RgbImage":
        return RgbImage(*(fn(c) for c in self.channels))


# -- PNM ---------------------------------------------------------------------

def _read_header(data: bytes) -> tuple[bytes, int, int, int, int]:
    """Parse a binary PNM header; returns (magic, width, height, maxval, payload offset)."""
    pos = 0
    fields = []
    n = len(data)
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise DecodeError(f"unsupported PNM magic {magic!r}", offset=0)
    pos = 2
    while len(fields) < 3:
        # skip whitespace and comments
        while pos < n and (data[pos] in _WHITESPACE or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < n and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
            pos += 1
        token = data[start:pos]
        if not token:
            raise DecodeError("truncated PNM header", offset=pos)
        if not token.isdigit():
            raise DecodeError(f"malformed PNM header field {token!r}", offset=start)
        fields.append(int(token))
    if pos >= n or data[pos] not in _WHITESPACE:
        raise DecodeError("missing whitespace after PNM maxval", offset=pos)
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise DecodeError(f"invalid PNM dimensions {width}x{height}", offset=2)
    if not 1 <= maxval <= 255:
        raise DecodeError(f"unsupported PNM maxval {maxval} (only 8-bit samples)", offset=pos - 1)
    return magic, width, height, maxval, pos


def decode_pnm(data: bytes) -> RgbImage:
    magic, width, height, _maxval, pos = _read_header(data)
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise DecodeError(
            f"truncated PNM payload: expected {need} bytes, got {len(payload)}",
            offset=pos + len(payload))
    samples = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    if channels == 1:
        return RgbImage.from_gray(samples.reshape(height, width))
    return RgbImage.from_array(samples.reshape(height, width, 3))


def _decode_with_pillow(data: bytes) -> RgbImage:
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise DecodeError("JPEG/PNG decoding requires Pillow, which is not installed") from exc
    try:
        with Image.open(io.BytesIO(data)) as im:
            im = im.convert("RGB")
            return RgbImage.from_array(np.asarray(im))
    except (OSError, ValueError) as exc:
        raise DecodeError(f"codec failed: {exc}") from exc


def decode_image(data: bytes, format_hint: str | None = None) -> RgbImage:
    """Decode raw file bytes into an :class:`RgbImage` with samples in [0, 255].

    Binary PPM/PGM are decoded natively. Other formats fall back to Pillow
    when it is importable.
    """
    hint = (format_hint or "").lower().lstrip(".")
    if hint in ("ppm", "pgm", "pnm") or (not hint and data[:2] in (b"P5", b"P6")):
        return decode_pnm(data)
    if not data:
        raise DecodeError("empty input", offset=0)
    if data[:1] == b"P" and data[1:2].isdigit():
        raise DecodeError(f"unsupported PNM variant {data[:2]!r} (binary P5/P6 only)", offset=0)
    return _decode_with_pillow(data)


def read_image(path) -> RgbImage:
    with open(path, "rb") as fh:
        data = fh.read()
    suffix = str(path).rsplit(".", 1)[-1] if "." in str(path) else None
    try:
        return decode_image(data, suffix)
    except DecodeError as exc:
        raise DecodeError(f"{path}: {exc}") from exc


def _to_bytes(grid: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(grid), 0, 255).astype(np.uint8)


def encode_pgm(grid) -> bytes:
    grid = as_grid(grid)
    h, w = grid.shape
    return b"P5\n%d %d\n255\n" % (w, h) + _to_bytes(grid).tobytes()


def encode_ppm(img: RgbImage) -> bytes:
    return b"P6\n%d %d\n255\n" % (img.width, img.height) + _to_bytes(img.to_array()).tobytes()


def write_pgm(path, grid) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(grid))


def write_ppm(path, img: RgbImage) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_ppm(img))


# -- pixel operations ----------------------------------------------------------

def to_grayscale(img: RgbImage) -> np.ndarray:
    """BT.601 luma of each pixel."""
    wr, wg, wb = LUMA_WEIGHTS
    return wr * img.r + wg * img.g + wb * img.b


def _axis_weights(n_in: int, n_out: int):
    # half-pixel centre alignment, clamped at the edges
    x = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    x = np.clip(x, 0.0, n_in - 1)
    i0 = np.floor(x).astype(np.intp)
    scale = float(1 << _WEIGHT_BITS)
    w = np.rint((x - i0) * scale) / scale
    carry = w >= 1.0
    i0[carry] += 1
    w[carry] = 0.0
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, w


def resize(grid, new_width: int, new_height: int) -> np.ndarray:
    """Bilinear resize. Same-size requests return an exact copy."""
    grid = as_grid(grid)
    if new_width < 1 or new_height < 1:
        raise DimensionError(f"target size must be positive, got {new_width}x{new_height}")
    h, w = grid.shape
    if (h, w) == (new_height, new_width):
        return grid.copy()
    c0, c1, cw = _axis_weights(w, new_width)
    rows = grid[:, c0] + cw * (grid[:, c1] - grid[:, c0])
    r0, r1, rw = _axis_weights(h, new_height)
    rw = rw[:, None]
    return rows[r0] + rw * (rows[r1] - rows[r0])


def resize_image(img: RgbImage, new_width: int, new_height: int) -> RgbImage:
    return img.map(lambda c: resize(c, new_width, new_height))


def pad_replicate(grid, margin: int) -> np.ndarray:
    """Grow the grid by ``margin`` on every side, copying the nearest edge pixel."""
    grid = as_grid(grid)
    if margin < 0:
        raise DimensionError(f"margin must be >= 0, got {margin}")
    if margin == 0:
        return grid.copy()
    return np.pad(grid, margin, mode="edge")
