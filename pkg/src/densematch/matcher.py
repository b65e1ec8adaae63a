"""Coarse-to-fine probabilistic matcher.

Per level: warp the second frame's descriptors by the upsampled running
estimate, evaluate census costs over a bounded displacement lattice,
turn the negated costs into a residual match density with a softmax,
and advance the running field by the density's local expectation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .density import (
    MatchDensity,
    Support,
    confidence_map,
    density_to_vector,
    kl_loss,
    vector_to_density,
)
from .fields import MotionField, ScalarImage, downsample_field, upsample_field
from .features import build_pyramid, match_cost

__all__ = ["MatchConfig", "LevelOutput", "match_level", "match_pair", "evaluate_levels"]


@dataclass(frozen=True)
class MatchConfig:
    """Matcher settings.

    ``corr_range`` is the per-level search radius (the density support
    radius). ``tau`` is the softmax temperature on [0, 1] census costs.
    ``agg_window`` box-averages the cost volume spatially before the
    softmax: a single pixel's census signature degenerates at local
    intensity extrema (all comparison bits equal), so per-pixel costs
    alone cannot disambiguate such pixels. Stereo estimates are clipped
    to ``stereo_sign`` at every level so composed disparities keep a
    single sign.
    """

    mode: str = "flow"
    levels: int | None = None
    corr_range: int = 4
    tau: float = 0.02
    agg_window: int = 5
    stereo_sign: int = -1

    def __post_init__(self) -> None:
        if self.mode not in ("flow", "stereo"):
            raise ValueError(f"mode must be 'flow' or 'stereo', got {self.mode!r}")
        if self.corr_range < 1:
            raise ValueError("corr_range must be >= 1")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.agg_window < 1 or self.agg_window % 2 == 0:
            raise ValueError("agg_window must be a positive odd size")
        if self.mode == "stereo" and self.stereo_sign not in (-1, 1):
            raise ValueError("stereo_sign must be -1 or +1")

    @property
    def num_levels(self) -> int:
        if self.levels is not None:
            return self.levels
        return 5 if self.mode == "flow" else 6

    @property
    def dim(self) -> int:
        return 2 if self.mode == "flow" else 1

    @property
    def support(self) -> Support:
        if self.mode == "flow":
            return Support.square(self.corr_range)
        return Support.line(self.corr_range)


@dataclass
class LevelOutput:
    """One level's results: running_field = prior + residual_field
    (then sign-clipped in stereo mode)."""

    residual_density: MatchDensity
    residual_field: MotionField
    running_field: MotionField
    confidence: ScalarImage


def _warp_descriptors(
    desc: np.ndarray, prior: MotionField
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Corner grids for sampling ``desc`` at x + prior(x).

    Census signatures are bit sets and cannot be blended, so the warp
    returns the four integer corner samples around each sub-pixel
    position together with their bilinear weights and validity; costs
    are interpolated instead of descriptors. Corners with zero weight
    or out-of-frame positions are flagged invalid.
    """
    h, w = desc.shape
    yy, xx = np.mgrid[0:h, 0:w]
    xs = xx + prior.vectors[:, :, 0]
    ys = yy + (prior.vectors[:, :, 1] if prior.dim == 2 else 0.0)
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    tx = xs - x0
    ty = ys - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    corners = []
    for cy, cx, wgt in (
        (0, 0, (1.0 - tx) * (1.0 - ty)),
        (0, 1, tx * (1.0 - ty)),
        (1, 0, (1.0 - tx) * ty),
        (1, 1, tx * ty),
    ):
        cyy = y0 + cy
        cxx = x0 + cx
        valid = (cxx >= 0) & (cxx < w) & (cyy >= 0) & (cyy < h) & prior.valid & (wgt > 0)
        samples = desc[np.clip(cyy, 0, h - 1), np.clip(cxx, 0, w - 1)]
        corners.append((samples, wgt, valid))
    return corners


def _softmax_density(cost: np.ndarray, tau: float, support: Support) -> MatchDensity:
    logits = (cost.min(axis=(2, 3), keepdims=True) - cost) / tau
    m = np.exp(logits)
    m /= m.sum(axis=(2, 3), keepdims=True)
    return MatchDensity(m, support)


def match_level(
    f1: np.ndarray,
    f2: np.ndarray,
    prior: MotionField,
    cfg: MatchConfig,
) -> LevelOutput:
    """Match one pyramid level given the upsampled coarser estimate.

    ``f1`` and ``f2`` are descriptor images of equal shape; ``prior``
    must live at the same resolution (a zero field at the coarsest
    level). Lattice cells whose warped sample is unavailable cost the
    maximum, driving mass away from out-of-frame hypotheses.
    """
    h, w = f1.shape
    if f2.shape != (h, w):
        raise ValueError("descriptor shapes differ")
    if (prior.height, prior.width) != (h, w):
        raise ValueError(f"prior is {prior.height}x{prior.width}, level is {h}x{w}")
    sup = cfg.support
    corners = _warp_descriptors(f2, prior)

    cost = np.ones((h, w, sup.size_y, sup.size_x))
    for iy, dy in enumerate(range(-sup.ry, sup.ry + 1)):
        y0, y1 = max(0, -dy), h - max(0, dy)
        if y0 >= y1:
            continue
        for ix, dx in enumerate(range(-sup.rx, sup.rx + 1)):
            x0, x1 = max(0, -dx), w - max(0, dx)
            if x0 >= x1:
                continue
            a = f1[y0:y1, x0:x1]
            acc = np.zeros(a.shape)
            for samples, wgt, valid in corners:
                sl = np.s_[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
                acc += wgt[sl] * match_cost(a, samples[sl], valid=valid[sl])
            cost[y0:y1, x0:x1, iy, ix] = acc
    if cfg.agg_window > 1:
        cost = uniform_filter(cost, size=(cfg.agg_window, cfg.agg_window, 1, 1), mode="nearest")

    dens = _softmax_density(cost, cfg.tau, sup)
    residual = density_to_vector(dens)
    run_vec = prior.vectors + residual.vectors
    if cfg.mode == "stereo":
        if cfg.stereo_sign < 0:
            run_vec = np.minimum(run_vec, 0.0)
        else:
            run_vec = np.maximum(run_vec, 0.0)
    running = MotionField(run_vec, prior.valid & residual.valid)
    return LevelOutput(dens, residual, running, confidence_map(dens))


def match_pair(
    i1: ScalarImage,
    i2: ScalarImage,
    cfg: MatchConfig | None = None,
) -> tuple[MotionField, ScalarImage, list[LevelOutput]]:
    """Match an image pair coarse-to-fine.

    Returns the full-resolution point estimate, the last level's
    confidence map, and every level's outputs for diagnostics.
    """
    cfg = cfg or MatchConfig()
    if (i1.height, i1.width) != (i2.height, i2.width):
        raise ValueError("images have different sizes")
    nlev = cfg.num_levels
    pyr1 = build_pyramid(i1, nlev)
    pyr2 = build_pyramid(i2, nlev)

    coarse = pyr1.level(0).shape
    prior = MotionField.zeros(coarse[0], coarse[1], cfg.dim)
    outputs: list[LevelOutput] = []
    for l in range(nlev):
        out = match_level(pyr1.level(l), pyr2.level(l), prior, cfg)
        outputs.append(out)
        if l + 1 < nlev:
            prior = upsample_field(out.running_field)
    return outputs[-1].running_field, outputs[-1].confidence, outputs


def evaluate_levels(gt: MotionField, outputs: list[LevelOutput]) -> list[float]:
    """Per-level KL losses of predicted residual densities against the
    splatted ground-truth residuals.

    The ground truth is brought to each level's resolution (valid-pixel
    pooling when sparse), the upsampled running estimate is subtracted,
    and the residual is splatted onto the level's support; residuals
    falling outside the support are excluded from that level's loss.
    """
    top = len(outputs) - 1
    losses: list[float] = []
    prior: MotionField | None = None
    for l, out in enumerate(outputs):
        gt_l = downsample_field(gt, 2 ** (top - l))
        if prior is None:
            prior = MotionField.zeros(gt_l.height, gt_l.width, gt_l.dim)
        res_gt = MotionField(gt_l.vectors - prior.vectors, gt_l.valid & prior.valid)
        p_gt = vector_to_density(res_gt, out.residual_density.support)
        losses.append(kl_loss(p_gt, out.residual_density))
        if l < top:
            prior = upsample_field(out.running_field)
    return losses
