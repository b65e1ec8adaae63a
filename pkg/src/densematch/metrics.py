"""Standard correspondence metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import MotionField

__all__ = ["EvalReport", "compute_epe_fl"]

OUTLIER_ERR_PX = 3.0
OUTLIER_ERR_FRAC = 0.05


@dataclass(frozen=True)
class EvalReport:
    """Metric bundle: mean end-point error, outlier fraction (error above
    both 3 px and 5% of the true magnitude), evaluated pixel count, and
    optionally the mean log-likelihood in nats."""

    epe: float
    fl: float
    valid_count: int
    avg_loglik: float | None = None

    def lines(self) -> list[str]:
        out = [f"epe={self.epe:.3f}", f"fl={self.fl:.3f}", f"valid={self.valid_count}"]
        if self.avg_loglik is not None:
            out.append(f"avg_loglik={self.avg_loglik:.3f}")
        return out


def compute_epe_fl(est: MotionField, gt: MotionField) -> EvalReport:
    """Mean Euclidean error and outlier fraction over jointly valid pixels."""
    if est.vectors.shape != gt.vectors.shape:
        raise ValueError(
            f"estimate {est.vectors.shape} and ground truth {gt.vectors.shape} differ"
        )
    region = est.valid & gt.valid
    if not region.any():
        raise ValueError("no jointly valid pixels")
    err = np.linalg.norm(est.vectors - gt.vectors, axis=2)[region]
    mag = np.linalg.norm(gt.vectors, axis=2)[region]
    outlier = (err > OUTLIER_ERR_PX) & (err > OUTLIER_ERR_FRAC * mag)
    return EvalReport(
        epe=float(err.mean()),
        fl=float(outlier.mean()),
        valid_count=int(region.sum()),
    )
