"""Prior-to-attention integration math.

Two ways of folding a rule-based prior into predicted attention scores:
multiply-and-renormalize, and a sigmoid-gated blend regularized by a KL
divergence loss.  The loss comes with analytic gradients with respect to the
combined attention entries; nothing here is trained, gate weights are loaded
from a file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (DegenerateProduct, DimensionMismatch, InvariantViolation,
                     IoError, NonFiniteLoss)
from .priors import ScoreVector

# Combined attention entries are clamped to this floor before the log so the
# loss stays finite when smoothing is enabled.
KL_FLOOR = 1e-12


def _as_scores(beta) -> np.ndarray:
    if isinstance(beta, ScoreVector):
        return beta.scores
    return np.asarray(beta, dtype=float)


@dataclass(frozen=True)
class AttentionRecord:
    """Predicted attention for one focal agent, plus optional embeddings.

    ``alpha_pred`` has shape (heads, neighbors) and every head row is a
    probability vector over the same neighbor ordering as the prior scores.
    """

    focal_id: str
    alpha_pred: np.ndarray
    focal_embedding: np.ndarray | None = None
    neighbor_embeddings: np.ndarray | None = None

    def __post_init__(self):
        alpha = np.asarray(self.alpha_pred, dtype=float)
        if alpha.ndim != 2 or alpha.shape[0] < 1:
            raise InvariantViolation("alpha_pred must have shape (heads, neighbors)")
        if (alpha < 0).any() or (alpha > 1 + 1e-9).any():
            raise InvariantViolation("alpha_pred entries must lie in [0, 1]")
        if alpha.shape[1] and np.abs(alpha.sum(axis=1) - 1.0).max() > 1e-6:
            raise InvariantViolation("every alpha_pred head must sum to 1")
        object.__setattr__(self, "alpha_pred", alpha)
        if self.focal_embedding is not None:
            object.__setattr__(self, "focal_embedding",
                               np.asarray(self.focal_embedding, dtype=float))
        if self.neighbor_embeddings is not None:
            object.__setattr__(self, "neighbor_embeddings",
                               np.asarray(self.neighbor_embeddings, dtype=float))

    @property
    def head_count(self) -> int:
        return self.alpha_pred.shape[0]

    @property
    def neighbor_count(self) -> int:
        return self.alpha_pred.shape[1]

    @property
    def has_embeddings(self) -> bool:
        return self.focal_embedding is not None and self.neighbor_embeddings is not None


@dataclass(frozen=True)
class GateLayer:
    """Single affine map plus logistic squashing.

    ``weights`` maps the concatenated gate input (focal embedding, neighbor
    embeddings, head-mean predicted attention, prior scores) to one gate value
    per neighbor, so its shape is (neighbors, input_dim).
    """

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise DimensionMismatch(
                f"gate weights {w.shape} incompatible with bias {b.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @classmethod
    def zeros(cls, n_neighbors: int, input_dim: int) -> "GateLayer":
        return cls(np.zeros((n_neighbors, input_dim)), np.zeros(n_neighbors))

    @classmethod
    def from_dict(cls, record: dict) -> "GateLayer":
        rows, cols = int(record["rows"]), int(record["cols"])
        w = np.asarray(record["w"], dtype=float)
        b = np.asarray(record["b"], dtype=float)
        if w.size != rows * cols:
            raise DimensionMismatch(
                f"weight data has {w.size} values, expected rows*cols = {rows * cols}")
        if b.size != rows:
            raise DimensionMismatch(f"bias has {b.size} values, expected {rows}")
        return cls(w.reshape(rows, cols), b)

    @classmethod
    def from_file(cls, path: str | Path) -> "GateLayer":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                record = json.load(fh)
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc}") from exc
        return cls.from_dict(record)


def gate_input(record: AttentionRecord, beta) -> np.ndarray:
    """Concatenated gate input: [u_i, u_j..., mean-over-heads alpha, beta]."""
    if not record.has_embeddings:
        raise DimensionMismatch("gate input requires embeddings on the record")
    b = _as_scores(beta)
    if b.shape[0] != record.neighbor_count:
        raise DimensionMismatch(
            f"prior has {b.shape[0]} entries, attention has {record.neighbor_count}")
    if record.neighbor_embeddings.shape[0] != record.neighbor_count:
        raise DimensionMismatch("one embedding per neighbor is required")
    alpha_mean = record.alpha_pred.mean(axis=0)
    return np.concatenate([record.focal_embedding,
                           record.neighbor_embeddings.ravel(),
                           alpha_mean, b])


def gate_forward(record: AttentionRecord, beta, layer: GateLayer) -> np.ndarray:
    """Per-neighbor gate values sigma in (0, 1)."""
    x = gate_input(record, beta)
    if layer.weights.shape != (record.neighbor_count, x.shape[0]):
        raise DimensionMismatch(
            f"gate layer shape {layer.weights.shape} does not match "
            f"({record.neighbor_count}, {x.shape[0]})")
    z = layer.weights @ x + layer.bias
    return 1.0 / (1.0 + np.exp(-z))


def mnr_combine(alpha_pred, beta) -> np.ndarray:
    """Multiply predicted attention with the prior and renormalize."""
    a = np.asarray(alpha_pred, dtype=float)
    b = _as_scores(beta)
    if a.shape != b.shape or a.ndim != 1 or a.shape[0] < 1:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} do not align")
    product = a * b
    total = product.sum()
    if total <= 0.0:
        raise DegenerateProduct("all attention-prior products are zero")
    return product / total


def gnl_combine(alpha_pred, beta, sigma) -> np.ndarray:
    """Gate-blended combination, renormalized over the neighbor set."""
    a = np.asarray(alpha_pred, dtype=float)
    b = _as_scores(beta)
    s = np.asarray(sigma, dtype=float)
    if not (a.shape == b.shape == s.shape) or a.ndim != 1:
        raise DimensionMismatch(
            f"shapes {a.shape}, {b.shape}, {s.shape} do not align")
    blend = s * a + (1.0 - s) * b
    total = blend.sum()
    if total <= 0.0:
        raise DegenerateProduct("gated blend sums to zero")
    return blend / total


def attn_loss(beta, alpha_cmb_heads: Sequence, smooth: bool = True
              ) -> tuple[float, np.ndarray]:
    """KL(prior || combined attention), averaged over heads and neighbors.

    Returns ``(loss, grads)`` where ``grads[h, j]`` is the exact derivative of
    the returned loss with respect to ``alpha_cmb_heads[h][j]``; entries below
    the smoothing floor carry zero gradient because the implemented loss is
    flat there.
    """
    b = _as_scores(beta)
    heads = np.asarray(alpha_cmb_heads, dtype=float)
    if heads.ndim == 1:
        heads = heads[None, :]
    if heads.ndim != 2 or heads.shape[1] != b.shape[0] or b.shape[0] < 1:
        raise DimensionMismatch(
            f"heads shape {heads.shape} does not align with prior {b.shape}")
    if not smooth and ((heads <= 0.0) & (b > 0.0)).any():
        raise NonFiniteLoss("combined attention is zero where the prior is positive")
    n = b.shape[0]
    n_heads = heads.shape[0]
    clamped = np.maximum(heads, KL_FLOOR)
    support = b > 0.0
    loss = 0.0
    grads = np.zeros_like(heads)
    for h in range(n_heads):
        loss += float(np.sum(b[support] * np.log(b[support] / clamped[h, support])))
        free = support & (heads[h] >= KL_FLOOR)
        grads[h, free] = -b[free] / (clamped[h, free] * n * n_heads)
    return loss / (n * n_heads), grads


def delta_alpha(alpha, beta) -> float:
    """Mean absolute difference between attention and prior scores."""
    a = np.asarray(alpha, dtype=float)
    b = _as_scores(beta)
    if a.shape != b.shape or a.ndim != 1 or a.shape[0] < 1:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} do not align")
    return float(np.abs(a - b).mean())
