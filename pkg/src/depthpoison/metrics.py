"""Depth evaluation metrics.

Threshold accuracies d1/d2/d3 count pixels whose symmetrized prediction
ratio max(pred/gt, gt/pred) is strictly below 1.25^k. AbsRel and RMSE
are the usual mean |pred - gt| / gt and root-mean-square error. All
statistics run over valid pixels only (gt > 0 and pred > 0); an optional
mask restricts the scope, which is how the attack-region d1 is computed
(against the clean, pre-attack ground truth). The physical-world shift
statistic is the mean absolute change in predicted depth over the target
mask between untriggered and triggered inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ValidationError

THRESHOLD_BASE = 1.25


def _scope(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValidationError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    valid = (gt > 0) & (pred > 0)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != gt.shape:
            raise ValidationError("mask shape does not match depth maps")
        valid &= mask
    if not valid.any():
        raise EvaluationError("no valid pixels in scope (gt > 0 and pred > 0)")
    return valid


def threshold_accuracy(
    pred: np.ndarray, gt: np.ndarray, k: int = 1, mask: np.ndarray | None = None
) -> float:
    if k not in (1, 2, 3):
        raise ValidationError("k must be 1, 2, or 3")
    valid = _scope(pred, gt, mask)
    p = np.asarray(pred, dtype=np.float64)[valid]
    g = np.asarray(gt, dtype=np.float64)[valid]
    ratio = np.maximum(p / g, g / p)
    return float(np.mean(ratio < THRESHOLD_BASE ** k))


def abs_rel(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray | None = None) -> float:
    valid = _scope(pred, gt, mask)
    p = np.asarray(pred, dtype=np.float64)[valid]
    g = np.asarray(gt, dtype=np.float64)[valid]
    return float(np.mean(np.abs(p - g) / g))


def rmse(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray | None = None) -> float:
    valid = _scope(pred, gt, mask)
    p = np.asarray(pred, dtype=np.float64)[valid]
    g = np.asarray(gt, dtype=np.float64)[valid]
    return float(np.sqrt(np.mean((p - g) ** 2)))


def depth_shift_rd(
    pred_clean: np.ndarray, pred_triggered: np.ndarray, mask: np.ndarray
) -> float:
    """Mean |triggered - clean| over the target mask; larger = stronger attack."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EvaluationError("depth shift needs a non-empty mask")
    valid = _scope(pred_triggered, pred_clean, mask)
    a = np.asarray(pred_clean, dtype=np.float64)[valid]
    b = np.asarray(pred_triggered, dtype=np.float64)[valid]
    return float(np.mean(np.abs(b - a)))


@dataclass(frozen=True)
class MetricsReport:
    d1: float
    d2: float
    d3: float
    abs_rel: float
    rmse: float
    valid_pixel_count: int
    region_d1: float | None = None
    r_d: float | None = None

    def format_line(self, label: str = "") -> str:
        parts = [
            f"d1={self.d1:.4f}",
            f"d2={self.d2:.4f}",
            f"d3={self.d3:.4f}",
            f"absrel={self.abs_rel:.4f}",
            f"rmse={self.rmse:.4f}",
            f"n={self.valid_pixel_count}",
        ]
        if self.region_d1 is not None:
            parts.append(f"region_d1={self.region_d1:.4f}")
        if self.r_d is not None:
            parts.append(f"rd={self.r_d:.4f}")
        return (label + " " if label else "") + " ".join(parts)


def evaluate_pair(
    pred: np.ndarray,
    gt: np.ndarray,
    region_mask: np.ndarray | None = None,
) -> MetricsReport:
    """Full metric suite on one prediction/ground-truth pair."""
    valid = _scope(pred, gt, None)
    region_d1 = None
    if region_mask is not None:
        region_d1 = threshold_accuracy(pred, gt, 1, region_mask)
    return MetricsReport(
        d1=threshold_accuracy(pred, gt, 1),
        d2=threshold_accuracy(pred, gt, 2),
        d3=threshold_accuracy(pred, gt, 3),
        abs_rel=abs_rel(pred, gt),
        rmse=rmse(pred, gt),
        valid_pixel_count=int(valid.sum()),
        region_d1=region_d1,
    )


def aggregate_reports(reports: list[MetricsReport]) -> MetricsReport:
    """Unweighted per-sample mean of each statistic."""
    if not reports:
        raise EvaluationError("nothing to aggregate")

    def mean_of(vals):
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    return MetricsReport(
        d1=mean_of([r.d1 for r in reports]),
        d2=mean_of([r.d2 for r in reports]),
        d3=mean_of([r.d3 for r in reports]),
        abs_rel=mean_of([r.abs_rel for r in reports]),
        rmse=mean_of([r.rmse for r in reports]),
        valid_pixel_count=int(sum(r.valid_pixel_count for r in reports)),
        region_d1=mean_of([r.region_d1 for r in reports]),
        r_d=mean_of([r.r_d for r in reports]),
    )
