"""Accuracy and interpretability metrics for multimodal predictions.

Standard displacement metrics (min over the top-k confident modes), the
endpoint miss rate, the confidence-penalized Brier variant, and the Pearson
correlation between per-agent error and prior-to-attention divergence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateVariance, HorizonMismatch, InvariantViolation

MISS_THRESHOLD = 2.0  # m


@dataclass(frozen=True)
class PredictionMode:
    trajectory: np.ndarray  # (T, 2)
    confidence: float

    def __post_init__(self):
        object.__setattr__(self, "trajectory",
                           np.asarray(self.trajectory, dtype=float))


@dataclass(frozen=True)
class MultiModalPrediction:
    agent_id: str
    modes: tuple[PredictionMode, ...]

    def __post_init__(self):
        if not self.modes:
            raise InvariantViolation("prediction needs at least one mode")
        total = 0.0
        length = self.modes[0].trajectory.shape[0]
        for mode in self.modes:
            if not (0.0 <= mode.confidence <= 1.0):
                raise InvariantViolation(
                    f"confidence {mode.confidence} outside [0, 1]")
            if mode.trajectory.shape != (length, 2):
                raise InvariantViolation("all modes must share the same horizon")
            total += mode.confidence
        if total > 1.0 + 1e-6:
            raise InvariantViolation(f"confidences sum to {total} > 1")

    @property
    def horizon(self) -> int:
        return self.modes[0].trajectory.shape[0]


def top_k_modes(pred: MultiModalPrediction, k: int) -> list[PredictionMode]:
    """The k most confident modes; confidence ties keep the lower mode index."""
    if k < 1:
        raise InvariantViolation("k must be >= 1")
    order = sorted(range(len(pred.modes)),
                   key=lambda i: (-pred.modes[i].confidence, i))
    return [pred.modes[i] for i in order[: min(k, len(pred.modes))]]


def _check_gt(pred: MultiModalPrediction, gt) -> np.ndarray:
    gt = np.asarray(gt, dtype=float)
    if gt.ndim != 2 or gt.shape[1] != 2 or gt.shape[0] != pred.horizon:
        raise HorizonMismatch(
            f"ground truth shape {gt.shape} does not match horizon {pred.horizon}")
    return gt


def min_ade(pred: MultiModalPrediction, gt, k: int) -> float:
    """Min over the top-k modes of the mean displacement over all steps."""
    gt = _check_gt(pred, gt)
    return min(float(np.hypot(*(m.trajectory - gt).T).mean())
               for m in top_k_modes(pred, k))


def min_fde(pred: MultiModalPrediction, gt, k: int) -> float:
    """Min over the top-k modes of the final-step displacement."""
    gt = _check_gt(pred, gt)
    return min(float(np.hypot(*(m.trajectory[-1] - gt[-1])))
               for m in top_k_modes(pred, k))


def brier_min_fde(pred: MultiModalPrediction, gt, k: int) -> float:
    """minFDE plus ``(1 - p)^2`` where p is the best-endpoint mode's confidence."""
    gt = _check_gt(pred, gt)
    modes = top_k_modes(pred, k)
    fdes = [float(np.hypot(*(m.trajectory[-1] - gt[-1]))) for m in modes]
    best = min(range(len(modes)), key=lambda i: fdes[i])
    return fdes[best] + (1.0 - modes[best].confidence) ** 2


def miss_rate(preds: Sequence[MultiModalPrediction], gts: Sequence, k: int,
              threshold: float = MISS_THRESHOLD) -> float:
    """Fraction of agents whose best top-k endpoint misses by more than ``threshold``."""
    if len(preds) != len(gts):
        raise HorizonMismatch(f"{len(preds)} predictions vs {len(gts)} ground truths")
    if not preds:
        return 0.0
    misses = sum(min_fde(pred, gt, k) > threshold for pred, gt in zip(preds, gts))
    return misses / len(preds)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson product-moment correlation coefficient."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.shape[0] < 2:
        raise DegenerateVariance("need two aligned samples of length >= 2")
    xd = x - x.mean()
    yd = y - y.mean()
    sx = float(np.sqrt((xd * xd).sum()))
    sy = float(np.sqrt((yd * yd).sum()))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateVariance("zero variance in one of the inputs")
    return float((xd * yd).sum() / (sx * sy))


@dataclass(frozen=True)
class CorrelationReport:
    """Correlation of per-agent error with both attention-divergence variants."""

    sample_count: int
    rho_pred: float | None
    rho_cmb: float | None
    stronger: str | None  # "pred" | "cmb" | None when both are degenerate

    def to_dict(self) -> dict:
        return {"sample_count": self.sample_count, "rho_pred": self.rho_pred,
                "rho_cmb": self.rho_cmb, "stronger": self.stronger}


def interpretability_report(min_ades: Sequence[float],
                            delta_alpha_pred: Sequence[float],
                            delta_alpha_cmb: Sequence[float]) -> CorrelationReport:
    """Correlate minADE with both divergence variants; flag the stronger one.

    Degenerate variants (constant input, or fewer than two agents) are
    reported as ``None`` instead of raising.
    """
    if not (len(min_ades) == len(delta_alpha_pred) == len(delta_alpha_cmb)):
        raise DegenerateVariance("per-agent lists must be aligned")

    def safe(values: Sequence[float]) -> float | None:
        try:
            return pearson(min_ades, values)
        except DegenerateVariance:
            return None

    rho_pred = safe(delta_alpha_pred)
    rho_cmb = safe(delta_alpha_cmb)
    if rho_pred is None and rho_cmb is None:
        stronger = None
    elif rho_cmb is None or (rho_pred is not None and abs(rho_pred) >= abs(rho_cmb)):
        stronger = "pred"
    else:
        stronger = "cmb"
    return CorrelationReport(len(min_ades), rho_pred, rho_cmb, stronger)
