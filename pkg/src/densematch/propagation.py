"""Region propagation by forward splatting of class probability maps.

Each source pixel distributes its class vector along its displacement,
either bilinearly around the point estimate (vector guidance) or to
every support cell weighted by the match density (probabilistic
guidance). Accumulations are normalized per target; targets that
receive no mass become unknown and carry a uniform class vector, and
unknown pixels never act as sources, so stale labels cannot masquerade
as evidence. Contributions are summed in a fixed (source, cell) order,
making the splat deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import MatchDensity
from .fields import MotionField

__all__ = [
    "LabelProbMap",
    "splat_forward",
    "propagate_sequence",
    "hard_labels",
    "score_segmentation",
]


@dataclass
class LabelProbMap:
    """Per-pixel class probabilities, shape (H, W, C); rows sum to 1.

    ``known`` is False where no information reached the pixel; those
    rows hold the uniform vector.
    """

    probs: np.ndarray
    known: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 3:
            raise ValueError(f"probs must have shape (H, W, C), got {self.probs.shape}")
        if self.known is None:
            self.known = np.ones(self.probs.shape[:2], dtype=bool)
        else:
            self.known = np.asarray(self.known, dtype=bool)
        if self.known.shape != self.probs.shape[:2]:
            raise ValueError("known mask shape does not match probs")

    @property
    def height(self) -> int:
        return self.probs.shape[0]

    @property
    def width(self) -> int:
        return self.probs.shape[1]

    @property
    def num_classes(self) -> int:
        return self.probs.shape[2]

    @classmethod
    def from_labels(cls, labels: np.ndarray, num_classes: int) -> "LabelProbMap":
        """One-hot map from integer labels; negative labels are unknown."""
        labels = np.asarray(labels)
        known = labels >= 0
        probs = np.full(labels.shape + (num_classes,), 1.0 / num_classes)
        kk = np.where(known)
        probs[kk] = np.eye(num_classes)[labels[kk]]
        return cls(probs, known)


def _vector_contributions(guide: MotionField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(source index, target index, weight) triplets for bilinear splatting,
    ordered source-major with the four window cells in row-major order."""
    h, w = guide.height, guide.width
    yy, xx = np.mgrid[0:h, 0:w]
    u = guide.vectors[:, :, 0]
    v = guide.vectors[:, :, 1] if guide.dim == 2 else np.zeros_like(u)
    # anchor and fraction from the vector alone: x + u could round across
    # an integer boundary and desynchronize weights from lattice splats
    ax = np.floor(u)
    ay = np.floor(v)
    tx = u - ax
    ty = v - ay

    src = np.repeat((yy * w + xx).ravel(), 4)
    cy = np.tile(np.array([0, 0, 1, 1]), h * w)
    cx = np.tile(np.array([0, 1, 0, 1]), h * w)
    tgt_y = np.repeat((yy + ay.astype(np.int64)).ravel(), 4) + cy
    tgt_x = np.repeat((xx + ax.astype(np.int64)).ravel(), 4) + cx

    weight = np.stack(
        [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty], axis=2
    ).reshape(-1)

    keep = (
        (tgt_x >= 0)
        & (tgt_x < w)
        & (tgt_y >= 0)
        & (tgt_y < h)
        & np.repeat(guide.valid.ravel(), 4)
    )
    tgt = tgt_y * w + tgt_x
    return src[keep], tgt[keep], weight[keep]


def _density_contributions(guide: MatchDensity) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Same triplets with every support cell as a candidate target,
    in the same (source, cell row-major) order."""
    h, w = guide.height, guide.width
    sup = guide.support
    yy, xx = np.mgrid[0:h, 0:w]
    offs_dx, offs_dy = sup.offsets()
    ncell = sup.ncells

    src = np.repeat((yy * w + xx).ravel(), ncell)
    tgt_y = np.repeat(yy.ravel(), ncell) + np.tile(offs_dy.ravel(), h * w)
    tgt_x = np.repeat(xx.ravel(), ncell) + np.tile(offs_dx.ravel(), h * w)
    weight = guide.mass.reshape(h * w * ncell)

    keep = (
        (tgt_x >= 0)
        & (tgt_x < w)
        & (tgt_y >= 0)
        & (tgt_y < h)
        & np.repeat(guide.valid.ravel(), ncell)
    )
    tgt = tgt_y * w + tgt_x
    return src[keep], tgt[keep], weight[keep]


def splat_forward(src: LabelProbMap, guide: MotionField | MatchDensity) -> LabelProbMap:
    """Push class probabilities forward along the guide.

    Collisions accumulate additively and each target is renormalized,
    keeping every output row a distribution.
    """
    if (src.height, src.width) != (guide.height, guide.width):
        raise ValueError("labels and guide have different resolutions")
    if isinstance(guide, MotionField):
        sidx, tidx, wts = _vector_contributions(guide)
    else:
        sidx, tidx, wts = _density_contributions(guide)

    known_src = src.known.ravel()[sidx]
    sidx = sidx[known_src]
    tidx = tidx[known_src]
    wts = wts[known_src]

    n = src.height * src.width
    flat = src.probs.reshape(n, src.num_classes)
    acc = np.empty((n, src.num_classes))
    for c in range(src.num_classes):
        acc[:, c] = np.bincount(tidx, weights=wts * flat[sidx, c], minlength=n)
    total = np.bincount(tidx, weights=wts, minlength=n)

    known = total > 0.0
    probs = np.full_like(acc, 1.0 / src.num_classes)
    probs[known] = acc[known] / total[known, None]
    return LabelProbMap(
        probs.reshape(src.height, src.width, src.num_classes),
        known.reshape(src.height, src.width),
    )


def propagate_sequence(
    seed: LabelProbMap, guides: list[MotionField | MatchDensity]
) -> list[LabelProbMap]:
    """Splat the seed through the guides sequentially, one map per frame."""
    outputs: list[LabelProbMap] = []
    current = seed
    for guide in guides:
        current = splat_forward(current, guide)
        outputs.append(current)
    return outputs


def hard_labels(labels: LabelProbMap) -> np.ndarray:
    """Highest-probability class per pixel; unknown pixels get -1."""
    out = labels.probs.argmax(axis=2).astype(np.int64)
    out[~labels.known] = -1
    return out


def score_segmentation(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> tuple[float, float]:
    """Mean IoU and mean accuracy in percent over classes present in gt.

    Negative labels on either side mark pixels excluded from both the
    numerator and denominator.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError("prediction and ground truth have different shapes")
    included = (pred >= 0) & (gt >= 0)
    present = np.unique(gt[gt >= 0])
    if present.size == 0:
        raise ValueError("ground truth has no labeled pixels")
    ious = []
    accs = []
    for c in present:
        p = (pred == c) & included
        g = (gt == c) & included
        tp = float(np.count_nonzero(p & g))
        fp = float(np.count_nonzero(p & ~g))
        fn = float(np.count_nonzero(~p & g))
        ious.append(tp / (tp + fp + fn) if tp + fp + fn > 0 else 1.0)
        accs.append(tp / (tp + fn) if tp + fn > 0 else 1.0)
    return 100.0 * float(np.mean(ious)), 100.0 * float(np.mean(accs))
