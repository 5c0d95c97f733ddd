"""The full descriptor: colour DBC texture map plus the original image, each
Haar-decomposed, with HOG computed on every sub-band and concatenated.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .haar import haar_decompose
from .hog import HogParams, hog, hog_length
from .image import RgbImage, read_image, resize_image
from .texture import DbcParams, colour_texture_map

ORIGINAL_MODES = ("grayscale", "per-channel")
# Bumped whenever the numerical recipe changes in a way the parameters don't capture.
RECIPE_VERSION = 1

# Integer BT.601 weights (per mille); see _original_branch.
_LUMA_PERMILLE = (299, 587, 114)


@dataclass(frozen=True)
class DescriptorConfig:
    width: int = 256
    height: int = 256
    dbc: DbcParams = field(default_factory=DbcParams)
    hog: HogParams = field(default_factory=HogParams)
    original_mode: str = "grayscale"
    wavelet_norm: str = "average"
    fusion: str = "mean"

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"canonical size must be positive, got {self.width}x{self.height}")
        if self.original_mode not in ORIGINAL_MODES:
            raise ValueError(f"original_mode must be one of {ORIGINAL_MODES}, got {self.original_mode!r}")
        if self.wavelet_norm != "average":
            raise ValueError(f"unsupported wavelet normalisation {self.wavelet_norm!r}")
        if self.fusion != "mean":
            raise ValueError(f"unsupported fusion rule {self.fusion!r}")
        # fail early if a sub-band cannot hold a HOG block
        hog_length(math.ceil(self.width / 2), math.ceil(self.height / 2), self.hog)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dbc"]["directions"] = list(self.dbc.directions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DescriptorConfig":
        d = dict(d)
        dbc = DbcParams(**d.pop("dbc", {}))
        hog_params = HogParams(**d.pop("hog", {}))
        return cls(dbc=dbc, hog=hog_params, **d)

    def canonical_bytes(self) -> bytes:
        payload = {"recipe": RECIPE_VERSION, "config": self.to_dict()}
        return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")

    @property
    def fingerprint(self) -> bytes:
        return hashlib.sha256(self.canonical_bytes()).digest()

    @property
    def original_count(self) -> int:
        return 1 if self.original_mode == "grayscale" else 3


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    fingerprint: bytes

    @property
    def dim(self) -> int:
        return len(self.values)

    def __len__(self):
        return len(self.values)


def feature_dim(config: DescriptorConfig) -> int:
    per_band = hog_length(math.ceil(config.width / 2), math.ceil(config.height / 2), config.hog)
    return (1 + config.original_count) * 4 * per_band


def _original_branch(img: RgbImage, mode: str) -> list[np.ndarray]:
    # Each grid is shifted so its minimum is zero. HOG ignores constant
    # offsets anyway; anchoring makes that hold bit-for-bit, so a brightness
    # shift of an 8-bit image cannot perturb the last bits of the descriptor.
    if mode == "grayscale":
        wr, wg, wb = _LUMA_PERMILLE
        scaled = wr * img.r + wg * img.g + wb * img.b
        return [(scaled - scaled.min()) / 1000.0]
    return [c - c.min() for c in img.channels]


def branch_images(img: RgbImage, config: DescriptorConfig) -> list[np.ndarray]:
    """The grids that get wavelet-decomposed: texture map first, then the original branch."""
    img = resize_image(img, config.width, config.height)
    texture = colour_texture_map(img.channels, config.dbc)
    return [texture] + _original_branch(img, config.original_mode)


def describe(img: RgbImage, config: DescriptorConfig = DescriptorConfig()) -> FeatureVector:
    parts = []
    for grid in branch_images(img, config):
        for band in haar_decompose(grid):
            parts.append(hog(band, config.hog).values)
    return FeatureVector(np.concatenate(parts), config.fingerprint)


def describe_path(path, config: DescriptorConfig = DescriptorConfig()) -> FeatureVector:
    return describe(read_image(path), config)


def tool_version() -> str:
    return __version__
