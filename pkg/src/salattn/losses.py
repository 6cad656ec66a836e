"""Training objectives on saliency logits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import Tensor, as_tensor, logistic
from .autodiff.functional import _logistic_np


@dataclass(frozen=True)
class LossConfig:
    lambda_ce: float = 1.0
    lambda_iou: float = 1.0
    k: float = 2.0
    smooth: float = 1e-6

    def __post_init__(self):
        if self.lambda_ce < 0 or self.lambda_iou < 0:
            raise ValueError("loss weights must be non-negative")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.smooth <= 0:
            raise ValueError("IoU smoothing must be positive")


def _check_target(logits: Tensor, target: np.ndarray) -> np.ndarray:
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if t.shape != logits.shape:
        raise ValueError(f"shape mismatch: prediction {logits.shape}, target {t.shape}")
    if t.size and (t.min() < 0.0 or t.max() > 1.0):
        raise ValueError("targets must lie in [0, 1]")
    return t


def bce_loss(logits: Tensor, target) -> Tensor:
    """Mean sigmoid cross-entropy, evaluated as ``max(x,0) - x t + log(1 + exp(-|x|))``."""
    logits = as_tensor(logits)
    t = _check_target(logits, target)
    x = logits.data
    per_pixel = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    n = x.size

    def bw(g):
        return ((_logistic_np(x) - t) * (g.reshape(()) / n),)

    return Tensor._from_op(np.array([per_pixel.mean()]), (logits,), bw)


def iou_loss(probs: Tensor, target, smooth: float = 1e-6) -> Tensor:
    """``1 - (I + s) / (U + s)`` with soft intersection and union."""
    probs = as_tensor(probs)
    t = Tensor(_check_target(probs, target))
    inter = (probs * t).sum()
    union = (probs + t - probs * t).sum()
    return 1.0 - (inter + smooth) / (union + smooth)


def stage1_loss(logits: Tensor, target, cfg: LossConfig = LossConfig()) -> Tensor:
    loss = bce_loss(logits, target) * cfg.lambda_ce
    if cfg.lambda_iou:
        loss = loss + iou_loss(logistic(logits), target, cfg.smooth) * cfg.lambda_iou
    return loss


def step_weights(n_steps: int, k: float) -> np.ndarray:
    """Weight of step ``i`` is ``k**(i+1) / k**n_steps``."""
    return np.array([k ** (i + 1) for i in range(n_steps)]) / k ** n_steps


def recurrent_loss(pred_logits: Sequence[Tensor], target, k: float = 2.0) -> Tensor:
    """Exponentially weighted cross-entropy over the per-step predictions."""
    if not pred_logits:
        raise ValueError("recurrent_loss needs at least one prediction")
    return weighted_step_sum([bce_loss(p, target) for p in pred_logits], k)


def weighted_step_sum(step_losses: Sequence[Tensor], k: float = 2.0) -> Tensor:
    if not step_losses:
        raise ValueError("need at least one per-step loss")
    total = None
    for w, term in zip(step_weights(len(step_losses), k), step_losses):
        term = as_tensor(term) * float(w)
        total = term if total is None else total + term
    return total
