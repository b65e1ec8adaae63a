"""Core grid types and resampling operators for dense correspondence.

Motion fields store per-pixel displacements in pixel units at their own
resolution, so moving a field across pyramid scales always rescales the
vectors together with the grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MotionField",
    "ScalarImage",
    "upsample_field",
    "downsample_field",
    "warp_backward",
]


@dataclass
class MotionField:
    """Per-pixel displacement field with a validity mask.

    ``vectors`` has shape (H, W, dim). dim=2 is a flow field storing
    (u, v) = (horizontal, vertical) displacement; dim=1 is a stereo
    field storing the horizontal component only.
    """

    vectors: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 3 or self.vectors.shape[2] not in (1, 2):
            raise ValueError(f"vectors must have shape (H, W, 1|2), got {self.vectors.shape}")
        if self.valid is None:
            self.valid = np.ones(self.vectors.shape[:2], dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != self.vectors.shape[:2]:
            raise ValueError("valid mask shape does not match vectors")

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    @property
    def dim(self) -> int:
        return self.vectors.shape[2]

    @classmethod
    def zeros(cls, height: int, width: int, dim: int = 2) -> "MotionField":
        return cls(np.zeros((height, width, dim)))

    @classmethod
    def constant(cls, height: int, width: int, vec) -> "MotionField":
        v = np.atleast_1d(np.asarray(vec, dtype=np.float64))
        return cls(np.broadcast_to(v, (height, width, v.shape[0])).copy())


@dataclass
class ScalarImage:
    """Raster of real samples, shape (H, W, C). 2D input is promoted to C=1."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 2:
            self.values = self.values[:, :, None]
        if self.values.ndim != 3:
            raise ValueError(f"values must have shape (H, W[, C]), got {self.values.shape}")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def plane(self, c: int = 0) -> np.ndarray:
        return self.values[:, :, c]


def _upsample2_axis(a: np.ndarray, axis: int) -> np.ndarray:
    # Bilinear x2 at half-pixel phase (output sample o reads input o/2 - 1/4);
    # borders clamp.
    a = np.moveaxis(a, axis, 0)
    prev = np.concatenate([a[:1], a[:-1]], axis=0)
    nxt = np.concatenate([a[1:], a[-1:]], axis=0)
    out = np.empty((2 * a.shape[0],) + a.shape[1:], dtype=np.float64)
    out[0::2] = 0.25 * prev + 0.75 * a
    out[1::2] = 0.75 * a + 0.25 * nxt
    return np.moveaxis(out, 0, axis)


def upsample_field(f: MotionField) -> MotionField:
    """Double the field resolution with bilinear interpolation.

    Vector magnitudes are multiplied by 2 so displacements stay in
    output-resolution pixel units. Validity replicates nearest-neighbor.
    """
    vec = _upsample2_axis(_upsample2_axis(f.vectors, 0), 1) * 2.0
    valid = np.repeat(np.repeat(f.valid, 2, axis=0), 2, axis=1)
    return MotionField(vec, valid)


def _halve_field(f: MotionField, sparse: bool) -> MotionField:
    h2, w2 = f.height // 2, f.width // 2
    blocks = f.vectors.reshape(h2, 2, w2, 2, f.dim)
    vmask = f.valid.reshape(h2, 2, w2, 2)
    if sparse:
        w = vmask[:, :, :, :, None].astype(np.float64)
        num = (blocks * w).sum(axis=(1, 3))
        den = w.sum(axis=(1, 3))
        vec = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        valid = vmask.any(axis=(1, 3))
    else:
        vec = blocks.mean(axis=(1, 3))
        valid = vmask.all(axis=(1, 3))
    return MotionField(vec * 0.5, valid)


def downsample_field(f: MotionField, factor: int, sparse: bool | None = None) -> MotionField:
    """Shrink a field by a power-of-2 factor, one octave at a time.

    Vector magnitudes are scaled by 1/factor. Dense fields are reduced
    with 2x2 block means (the bilinear kernel at matched phase); sparse
    fields average only the valid pixels of each block and a block with
    no valid source becomes invalid. ``sparse=None`` infers sparsity
    from the mask.
    """
    if factor < 1 or factor & (factor - 1):
        raise ValueError(f"downsample factor must be a power of 2, got {factor}")
    if f.height % factor or f.width % factor:
        raise ValueError(f"factor {factor} does not divide field size {f.height}x{f.width}")
    if sparse is None:
        sparse = not bool(f.valid.all())
    out = f
    while factor > 1:
        out = _halve_field(out, sparse)
        factor //= 2
    return out


def warp_backward(img: ScalarImage, f: MotionField) -> tuple[ScalarImage, np.ndarray]:
    """Sample ``img`` at x + f(x) with bilinear interpolation.

    Returns the warped image and a boolean mask. Pixels whose sample
    coordinate leaves the image, or whose field entry is invalid, are
    masked out and filled with 0 rather than clamped: clamping would
    fabricate texture at the borders.
    """
    if (img.height, img.width) != (f.height, f.width):
        raise ValueError("image and field resolutions differ")
    h, w = img.height, img.width
    yy, xx = np.mgrid[0:h, 0:w]
    xs = xx + f.vectors[:, :, 0]
    ys = yy + (f.vectors[:, :, 1] if f.dim == 2 else 0.0)
    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1) & f.valid

    x0 = np.floor(xs)
    y0 = np.floor(ys)
    tx = (xs - x0)[:, :, None]
    ty = (ys - y0)[:, :, None]
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)

    v = img.values
    out = (
        (1.0 - ty) * ((1.0 - tx) * v[y0c, x0c] + tx * v[y0c, x1c])
        + ty * ((1.0 - tx) * v[y1c, x0c] + tx * v[y1c, x1c])
    )
    out[~valid] = 0.0
    return ScalarImage(out), valid
