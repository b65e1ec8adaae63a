"""Discrete match-density algebra.

A match density assigns each pixel a probability mass function over a
bounded lattice of integer displacements. This module provides the
conversions between real-valued displacement fields and densities
(bilinear splatting and local expectation over the peak window), the
KL training loss, confidence maps, composition of per-level residual
estimates, and a brute-force full-density composition intended as a
desk-scale oracle.

Conventions: displacement vectors are (u, v) = (horizontal, vertical);
mass arrays are indexed [y, x, dy + ry, dx + rx]. A density with a
1-row support (ry == 0) models the 1D horizontal search used for
stereo; its peak window is 1x2 instead of 2x2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import MotionField, ScalarImage, upsample_field

__all__ = [
    "Support",
    "SupportWindow",
    "MatchDensity",
    "FullDensity",
    "vector_to_density",
    "select_peak_window",
    "window_at",
    "density_to_vector",
    "density_mode",
    "kl_loss",
    "confidence_map",
    "compose_residual_fields",
    "compose_full_density",
    "mean_log_likelihood",
]

MASS_EPS = 1e-12


@dataclass(frozen=True)
class Support:
    """Integer displacement lattice dx in [-rx, rx], dy in [-ry, ry]."""

    rx: int
    ry: int

    def __post_init__(self) -> None:
        if self.rx < 1 or self.ry < 0:
            raise ValueError(f"invalid support radii ({self.rx}, {self.ry})")

    @classmethod
    def square(cls, r: int) -> "Support":
        return cls(r, r)

    @classmethod
    def line(cls, r: int) -> "Support":
        return cls(r, 0)

    @property
    def size_x(self) -> int:
        return 2 * self.rx + 1

    @property
    def size_y(self) -> int:
        return 2 * self.ry + 1

    @property
    def ncells(self) -> int:
        return self.size_x * self.size_y

    @property
    def window_h(self) -> int:
        # Peak windows are 2x2 on 2D supports, 1x2 on 1D ones.
        return 2 if self.ry > 0 else 1

    def offsets(self) -> tuple[np.ndarray, np.ndarray]:
        """(dx, dy) integer offset grids, each of shape (size_y, size_x)."""
        dx = np.arange(-self.rx, self.rx + 1)
        dy = np.arange(-self.ry, self.ry + 1)
        return np.meshgrid(dx, dy)


@dataclass(frozen=True)
class SupportWindow:
    """One peak window: anchor = integer displacement of its min corner."""

    anchor_x: int
    anchor_y: int
    width: int = 2
    height: int = 2


@dataclass
class MatchDensity:
    """Per-pixel probability mass over a bounded displacement lattice.

    ``mass`` has shape (H, W, support.size_y, support.size_x). Valid
    pixels sum to 1 (within float rounding); invalid pixels hold
    exactly zero mass.
    """

    mass: np.ndarray
    support: Support
    valid: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.mass = np.asarray(self.mass, dtype=np.float64)
        expected = (self.support.size_y, self.support.size_x)
        if self.mass.ndim != 4 or self.mass.shape[2:] != expected:
            raise ValueError(f"mass must have shape (H, W, {expected[0]}, {expected[1]})")
        if self.valid is None:
            self.valid = np.ones(self.mass.shape[:2], dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != self.mass.shape[:2]:
            raise ValueError("valid mask shape does not match mass")

    @property
    def height(self) -> int:
        return self.mass.shape[0]

    @property
    def width(self) -> int:
        return self.mass.shape[1]

    @property
    def dim(self) -> int:
        return 2 if self.support.ry > 0 else 1


def vector_to_density(f: MotionField, support: Support) -> MatchDensity:
    """Splat each displacement's bilinear weights onto the lattice.

    A real displacement falls in a unique 2x2 (or 1x2) cell window; its
    mass is the product of componentwise complements of the fractional
    offsets, so every valid pixel receives total mass 1. Displacements
    outside the support hull mark the pixel invalid.
    """
    if (support.ry == 0) != (f.dim == 1):
        raise ValueError("field dim and support dimensionality disagree")
    h, w = f.height, f.width
    u = f.vectors[:, :, 0]
    ax = np.clip(np.floor(u), -support.rx, support.rx - 1)
    tx = u - ax
    ix = (ax + support.rx).astype(np.int64)
    valid = f.valid & (u >= -support.rx) & (u <= support.rx)

    mass = np.zeros((h, w, support.size_y, support.size_x))
    yy, xx = np.mgrid[0:h, 0:w]
    if support.ry == 0:
        mass[yy, xx, 0, ix] = 1.0 - tx
        mass[yy, xx, 0, ix + 1] = tx
    else:
        v = f.vectors[:, :, 1]
        ay = np.clip(np.floor(v), -support.ry, support.ry - 1)
        ty = v - ay
        iy = (ay + support.ry).astype(np.int64)
        valid &= (v >= -support.ry) & (v <= support.ry)
        mass[yy, xx, iy, ix] = (1.0 - tx) * (1.0 - ty)
        mass[yy, xx, iy, ix + 1] = tx * (1.0 - ty)
        mass[yy, xx, iy + 1, ix] = (1.0 - tx) * ty
        mass[yy, xx, iy + 1, ix + 1] = tx * ty
    mass[~valid] = 0.0
    return MatchDensity(mass, support, valid)


def _window_sums(p: MatchDensity) -> np.ndarray:
    """Total mass of every anchor-indexed sliding window, (H, W, Ay, Ax)."""
    pairs_x = p.mass[:, :, :, :-1] + p.mass[:, :, :, 1:]
    if p.support.ry > 0:
        return pairs_x[:, :, :-1, :] + pairs_x[:, :, 1:, :]
    return pairs_x


def select_peak_window(p: MatchDensity) -> np.ndarray:
    """Anchor (ax, ay) of the max-mass window per pixel, shape (H, W, 2).

    Ties resolve to the smallest anchor in row-major (ay, ax) order so
    results are deterministic.
    """
    sums = _window_sums(p)
    ny, nx = sums.shape[2], sums.shape[3]
    flat = sums.reshape(p.height, p.width, ny * nx)
    best = flat.argmax(axis=2)  # first max = row-major smallest anchor
    ay = best // nx - p.support.ry
    ax = best % nx - p.support.rx
    return np.stack([ax, ay], axis=2)


def window_at(p: MatchDensity, x: int, y: int) -> SupportWindow:
    """Peak window of one pixel, for inspection and tests."""
    ax, ay = select_peak_window(p)[y, x]
    return SupportWindow(int(ax), int(ay), 2, p.support.window_h)


def _gather_window(p: MatchDensity, anchors: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Window masses (H, W, wh, 2) plus (dx, dy) offset arrays per cell."""
    yy, xx = np.mgrid[0 : p.height, 0 : p.width]
    ix = anchors[:, :, 0] + p.support.rx
    iy = anchors[:, :, 1] + p.support.ry
    wh = p.support.window_h
    cells = np.empty((p.height, p.width, wh, 2))
    dx = np.empty((wh, 2), dtype=np.int64)
    dy = np.empty((wh, 2), dtype=np.int64)
    for cy in range(wh):
        for cx in range(2):
            cells[:, :, cy, cx] = p.mass[yy, xx, iy + cy, ix + cx]
            dx[cy, cx] = cx
            dy[cy, cx] = cy
    return cells, dx, dy


def density_to_vector(p: MatchDensity) -> MotionField:
    """Local expectation: renormalize mass inside the peak window and
    return its mean displacement. Pixels retaining zero mass are invalid."""
    anchors = select_peak_window(p)
    cells, dx, dy = _gather_window(p, anchors)
    total = cells.sum(axis=(2, 3))
    valid = p.valid & (total > 0.0)
    safe = np.where(total > 0.0, total, 1.0)

    ex = (cells * dx).sum(axis=(2, 3)) / safe + anchors[:, :, 0]
    if p.support.ry > 0:
        ey = (cells * dy).sum(axis=(2, 3)) / safe + anchors[:, :, 1]
        vec = np.stack([ex, ey], axis=2)
    else:
        vec = ex[:, :, None]
    vec[~valid] = 0.0
    return MotionField(vec, valid)


def density_mode(p: MatchDensity) -> MotionField:
    """Argmax displacement per pixel (ties: row-major smallest offset)."""
    flat = p.mass.reshape(p.height, p.width, -1)
    best = flat.argmax(axis=2)
    dy = best // p.support.size_x - p.support.ry
    dx = best % p.support.size_x - p.support.rx
    if p.support.ry > 0:
        vec = np.stack([dx, dy], axis=2).astype(np.float64)
    else:
        vec = dx[:, :, None].astype(np.float64)
    return MotionField(vec, p.valid.copy())


def kl_loss(p_gt: MatchDensity, p_res: MatchDensity, eps: float = MASS_EPS) -> float:
    """Mean over valid pixels of sum_g p_gt(g) (log p_gt(g) - log p_res(g)).

    Zero-mass target cells contribute nothing; predicted mass is floored
    at ``eps`` before the log since softmax outputs can underflow.
    """
    if p_gt.support != p_res.support:
        raise ValueError("densities have different supports")
    valid = p_gt.valid & p_res.valid
    if not valid.any():
        return 0.0
    pg = p_gt.mass[valid]
    pr = np.maximum(p_res.mass[valid], eps)
    log_pg = np.log(np.where(pg > 0.0, pg, 1.0))
    per_pixel = (pg * (log_pg - np.log(pr))).sum(axis=(1, 2))
    return float(per_pixel.mean())


def confidence_map(p: MatchDensity) -> ScalarImage:
    """Total mass inside the peak window, per pixel, in [0, 1].

    Uncertainty is its complement to 1. Invalid pixels report 0.
    """
    conf = _window_sums(p).max(axis=(2, 3))
    return ScalarImage(np.where(p.valid, conf, 0.0))


def compose_residual_fields(residuals: list[MotionField]) -> MotionField:
    """Sum per-level residuals coarse-to-fine by iterated upsample-and-add.

    Each level must double the resolution of the previous one; the
    result lives at the finest level's resolution.
    """
    if not residuals:
        raise ValueError("no residual levels given")
    out = residuals[0]
    for level, res in enumerate(residuals[1:], start=1):
        up = upsample_field(out)
        if (up.height, up.width) != (res.height, res.width):
            raise ValueError(
                f"level {level} is {res.height}x{res.width}, expected {up.height}x{up.width}"
            )
        out = MotionField(up.vectors + res.vectors, up.valid & res.valid)
    return out


@dataclass
class FullDensity:
    """Composed per-pixel distribution plus the mass lost to truncation.

    ``density.mass`` holds every enumerated composition path that lands
    within the output support; ``truncated`` is the per-pixel mass of
    paths that fell outside. For valid pixels the two sum to 1.
    """

    density: MatchDensity
    truncated: np.ndarray


def compose_full_density(
    levels: list[MatchDensity],
    max_support: int,
    budget: int = 50_000_000,
) -> FullDensity:
    """Compose per-level densities into each pixel's full distribution.

    Enumerates every coarse-to-fine combination of lattice displacements
    (conditioning each level on the pixel's ancestor at that level), so
    it is exact but only feasible on tiny grids; the enumeration size is
    checked against ``budget`` and overruns raise instead of silently
    truncating. Composed paths outside ``max_support`` are tallied in
    the truncated channel.
    """
    if not levels:
        raise ValueError("no density levels given")
    fine = levels[-1]
    nlev = len(levels)
    h, w = fine.height, fine.width
    for l, p in enumerate(levels):
        scale = 2 ** (nlev - 1 - l)
        if (p.height * scale, p.width * scale) != (h, w):
            raise ValueError(f"level {l} resolution does not halve per level")
    ncombo = 1
    for p in levels:
        ncombo *= p.support.ncells
    if h * w * ncombo > budget:
        raise ValueError(f"enumeration of {h * w * ncombo} paths exceeds budget {budget}")

    prob = np.ones((h, w, 1))
    comp_dx = np.zeros(1)
    comp_dy = np.zeros(1)
    valid = np.ones((h, w), dtype=bool)
    rows = np.arange(h)
    cols = np.arange(w)
    for l, p in enumerate(levels):
        scale = 2 ** (nlev - 1 - l)
        offs_dx, offs_dy = p.support.offsets()
        comp_dx = (comp_dx[:, None] + scale * offs_dx.ravel()[None, :]).ravel()
        comp_dy = (comp_dy[:, None] + scale * offs_dy.ravel()[None, :]).ravel()
        anc = p.mass.reshape(p.height, p.width, -1)[rows // scale][:, cols // scale]
        prob = (prob[:, :, :, None] * anc[:, :, None, :]).reshape(h, w, -1)
        valid &= p.valid[rows // scale][:, cols // scale]

    out_support = Support.square(max_support) if fine.support.ry > 0 else Support.line(max_support)
    in_x = np.abs(comp_dx) <= max_support
    in_y = np.abs(comp_dy) <= max_support if fine.support.ry > 0 else comp_dy == 0
    keep = in_x & in_y

    cell = (comp_dy[keep] + out_support.ry).astype(np.int64) * out_support.size_x + (
        comp_dx[keep] + out_support.rx
    ).astype(np.int64)
    mass = np.zeros((h, w, out_support.ncells))
    np.add.at(mass, (slice(None), slice(None), cell), prob[:, :, keep])
    truncated = prob[:, :, ~keep].sum(axis=2)

    mass[~valid] = 0.0
    truncated[~valid] = 0.0
    mass = mass.reshape(h, w, out_support.size_y, out_support.size_x)
    return FullDensity(MatchDensity(mass, out_support, valid), truncated)


def mean_log_likelihood(p: MatchDensity, f_gt: MotionField, eps: float = MASS_EPS) -> float:
    """Mean log of the density's bilinearly interpolated mass at the
    ground-truth displacement, over pixels valid in both inputs.

    The interpolated value is the mass of the 2x2 (or 1x2) window
    containing the displacement, weighted bilinearly, floored at ``eps``.
    Ground truth outside the support hull therefore scores log(eps).
    """
    if (p.height, p.width) != (f_gt.height, f_gt.width):
        raise ValueError("density and field resolutions differ")
    if (p.support.ry == 0) != (f_gt.dim == 1):
        raise ValueError("field dim and support dimensionality disagree")
    sup = p.support
    u = f_gt.vectors[:, :, 0]
    ax = np.clip(np.floor(u), -sup.rx, sup.rx - 1)
    tx = u - ax
    ix = (ax + sup.rx).astype(np.int64)
    in_range = (u >= -sup.rx) & (u <= sup.rx)

    yy, xx = np.mgrid[0 : p.height, 0 : p.width]
    if sup.ry == 0:
        val = (1.0 - tx) * p.mass[yy, xx, 0, ix] + tx * p.mass[yy, xx, 0, ix + 1]
    else:
        v = f_gt.vectors[:, :, 1]
        ay = np.clip(np.floor(v), -sup.ry, sup.ry - 1)
        ty = v - ay
        iy = (ay + sup.ry).astype(np.int64)
        in_range &= (v >= -sup.ry) & (v <= sup.ry)
        val = (1.0 - ty) * (
            (1.0 - tx) * p.mass[yy, xx, iy, ix] + tx * p.mass[yy, xx, iy, ix + 1]
        ) + ty * ((1.0 - tx) * p.mass[yy, xx, iy + 1, ix] + tx * p.mass[yy, xx, iy + 1, ix + 1])

    region = f_gt.valid & p.valid
    if not region.any():
        raise ValueError("no pixel is valid in both density and ground truth")
    val = np.where(in_range, val, 0.0)
    return float(np.log(np.maximum(val[region], eps)).mean())
