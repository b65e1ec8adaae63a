"""Census-descriptor feature pyramids.

A fixed, training-free descriptor: each pixel is compared against the
63 surrounding cells of its neighborhood (offsets -3..+4 on both axes,
anchor excluded) and the comparison bits are packed into a uint64.
Census signatures depend only on intensity ordering, which makes the
matching robust to monotonic illumination changes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .fields import ScalarImage

__all__ = ["CENSUS_BITS", "FeaturePyramid", "to_gray", "census_transform", "build_pyramid", "match_cost"]

CENSUS_BITS = 63
_OFFSETS = [(dy, dx) for dy in range(-3, 5) for dx in range(-3, 5) if (dy, dx) != (0, 0)]
_BLUR_SIGMA = 1.0  # antialiasing before each x2 decimation


@dataclass
class FeaturePyramid:
    """Descriptor images for one frame, index 0 coarsest."""

    descriptors: list[np.ndarray]

    @property
    def num_levels(self) -> int:
        return len(self.descriptors)

    def level(self, l: int) -> np.ndarray:
        return self.descriptors[l]


def to_gray(img: ScalarImage) -> np.ndarray:
    if img.channels == 3:
        return img.values @ np.array([0.299, 0.587, 0.114])
    return img.values.mean(axis=2)


def census_transform(gray: np.ndarray) -> np.ndarray:
    """Packed census signature per pixel; borders use clamped neighborhoods."""
    gray = np.asarray(gray, dtype=np.float64)
    h, w = gray.shape
    ys = np.arange(h)
    xs = np.arange(w)
    desc = np.zeros((h, w), dtype=np.uint64)
    for k, (dy, dx) in enumerate(_OFFSETS):
        neighbor = gray[np.clip(ys + dy, 0, h - 1)][:, np.clip(xs + dx, 0, w - 1)]
        desc |= (neighbor > gray).astype(np.uint64) << np.uint64(k)
    return desc


def build_pyramid(img: ScalarImage, levels: int) -> FeaturePyramid:
    """Gaussian blur + 2x2 mean decimation per octave, census at each level.

    Level sizes must divide evenly and the coarsest level must be at
    least 4x4 so descriptors keep some context.
    """
    if levels < 1:
        raise ValueError("need at least one pyramid level")
    factor = 2 ** (levels - 1)
    gray = to_gray(img)
    h, w = gray.shape
    if h % factor or w % factor:
        raise ValueError(f"image size {h}x{w} not divisible by {factor}")
    if h // factor < 4 or w // factor < 4:
        raise ValueError(f"image too small: coarsest level {h // factor}x{w // factor} < 4x4")

    grays = [gray]
    for _ in range(levels - 1):
        smoothed = gaussian_filter(grays[-1], _BLUR_SIGMA, mode="nearest")
        hh, ww = smoothed.shape
        grays.append(smoothed.reshape(hh // 2, 2, ww // 2, 2).mean(axis=(1, 3)))
    grays.reverse()
    return FeaturePyramid([census_transform(g) for g in grays])


def match_cost(a: np.ndarray, b: np.ndarray, valid: np.ndarray | None = None) -> np.ndarray:
    """Normalized Hamming distance in [0, 1] between packed descriptors.

    Positions flagged invalid (out-of-bounds samples) cost the maximum 1.
    """
    d = np.bitwise_count(np.bitwise_xor(a, b)).astype(np.float64) / CENSUS_BITS
    if valid is not None:
        d = np.where(valid, d, 1.0)
    return d
