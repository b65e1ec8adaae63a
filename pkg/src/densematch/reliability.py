"""Inlier/outlier classification of correspondence estimates.

Two predictors over the same estimate: thresholding the model's own
uncertainty map, and the classical forward-backward consistency check.
Both produce binary outlier masks scored against a ground-truth error
rule with per-class IoU and accuracy, evaluated over the non-occluded
region and the full region.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import MotionField, ScalarImage, warp_backward

__all__ = [
    "ClassScores",
    "RegionScores",
    "OutlierReport",
    "classify_by_uncertainty",
    "classify_by_fb_consistency",
    "score_classification",
]

FB_ABS_THRESH = 3.0
FB_REL_THRESH = 0.05
# A pixel's estimate counts as a ground-truth outlier when its error
# exceeds both 3 px and 5% of the true magnitude.
GT_ERR_PX = 3.0
GT_ERR_FRAC = 0.05


def _as_plane(values: ScalarImage | np.ndarray) -> np.ndarray:
    if isinstance(values, ScalarImage):
        return values.plane(0)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[:, :, 0]
    return arr


def classify_by_uncertainty(confidence: ScalarImage | np.ndarray, sigma: float) -> np.ndarray:
    """Outlier mask: pixels whose uncertainty (1 - confidence) exceeds sigma."""
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    conf = _as_plane(confidence)
    return (1.0 - conf) > sigma


def classify_by_fb_consistency(
    f_fw: MotionField,
    f_bw: MotionField,
    abs_thresh: float = FB_ABS_THRESH,
    rel_thresh: float = FB_REL_THRESH,
) -> np.ndarray:
    """Outlier mask from forward-backward disagreement.

    The backward field is sampled bilinearly at x + f_fw(x); a pixel is
    an outlier when |f_fw(x) + f_bw(x + f_fw(x))| exceeds
    max(abs_thresh, rel_thresh * (|f_fw| + |f_bw_warped|)), or when the
    round trip cannot be evaluated at all.
    """
    if (f_fw.height, f_fw.width) != (f_bw.height, f_bw.width):
        raise ValueError("forward and backward fields have different sizes")
    warped_bw, ok = warp_backward(ScalarImage(f_bw.vectors), f_fw)
    diff = f_fw.vectors + warped_bw.values
    err = np.linalg.norm(diff, axis=2)
    mag = np.linalg.norm(f_fw.vectors, axis=2) + np.linalg.norm(warped_bw.values, axis=2)
    thresh = np.maximum(abs_thresh, rel_thresh * mag)
    return (err > thresh) | ~ok


@dataclass(frozen=True)
class ClassScores:
    iou: float
    acc: float


@dataclass(frozen=True)
class RegionScores:
    outlier: ClassScores
    inlier: ClassScores

    @property
    def mean(self) -> ClassScores:
        return ClassScores(
            (self.outlier.iou + self.inlier.iou) / 2.0,
            (self.outlier.acc + self.inlier.acc) / 2.0,
        )


@dataclass(frozen=True)
class OutlierReport:
    """Per-class, per-region classification scores in percent."""

    noc: RegionScores
    all: RegionScores
    threshold: float | None = None

    def lines(self) -> list[str]:
        out = []
        if self.threshold is not None:
            out.append(f"sigma={self.threshold:g}")
        for region_name, region in (("noc", self.noc), ("all", self.all)):
            for cls_name, cls in (
                ("outlier", region.outlier),
                ("inlier", region.inlier),
                ("mean", region.mean),
            ):
                out.append(f"{region_name}.{cls_name}.iou={cls.iou:.2f}")
                out.append(f"{region_name}.{cls_name}.acc={cls.acc:.2f}")
        return out

    def table(self) -> str:
        rows = [f"{'':10s} {'IoU(Noc)':>9s} {'Acc(Noc)':>9s} {'IoU(All)':>9s} {'Acc(All)':>9s}"]
        for name, n, a in (
            ("outlier", self.noc.outlier, self.all.outlier),
            ("inlier", self.noc.inlier, self.all.inlier),
            ("mean", self.noc.mean, self.all.mean),
        ):
            rows.append(f"{name:10s} {n.iou:9.2f} {n.acc:9.2f} {a.iou:9.2f} {a.acc:9.2f}")
        return "\n".join(rows)


def _class_scores(pred: np.ndarray, truth: np.ndarray, region: np.ndarray) -> ClassScores:
    tp = float(np.count_nonzero(pred & truth & region))
    fp = float(np.count_nonzero(pred & ~truth & region))
    fn = float(np.count_nonzero(~pred & truth & region))
    # 0/0 means the class is absent and never predicted: score it perfect.
    iou = tp / (tp + fp + fn) if tp + fp + fn > 0 else 1.0
    acc = tp / (tp + fn) if tp + fn > 0 else 1.0
    return ClassScores(100.0 * iou, 100.0 * acc)


def score_classification(
    pred: np.ndarray,
    gt_flow: MotionField,
    est_flow: MotionField,
    noc_mask: np.ndarray | None = None,
    threshold: float | None = None,
) -> OutlierReport:
    """Score a predicted outlier mask against the error-rule ground truth.

    Pixels valid in both fields are evaluated; Noc restricts them
    further with ``noc_mask``.
    """
    if gt_flow.vectors.shape != est_flow.vectors.shape:
        raise ValueError("ground-truth and estimated fields have different shapes")
    pred = np.asarray(pred, dtype=bool)
    region_all = gt_flow.valid & est_flow.valid
    if not region_all.any():
        raise ValueError("no jointly valid pixels to score")
    err = np.linalg.norm(est_flow.vectors - gt_flow.vectors, axis=2)
    mag = np.linalg.norm(gt_flow.vectors, axis=2)
    truth = (err > GT_ERR_PX) & (err > GT_ERR_FRAC * mag)

    region_noc = region_all if noc_mask is None else region_all & np.asarray(noc_mask, dtype=bool)

    def region_scores(region: np.ndarray) -> RegionScores:
        return RegionScores(
            outlier=_class_scores(pred, truth, region),
            inlier=_class_scores(~pred, ~truth, region),
        )

    return OutlierReport(noc=region_scores(region_noc), all=region_scores(region_all), threshold=threshold)
