"""Saliency evaluation: mean absolute error and max F-beta over a threshold sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BETA2 = 0.3
N_THRESHOLDS = 256


def default_thresholds(n: int = N_THRESHOLDS) -> np.ndarray:
    return np.arange(n) / n


def _pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: prediction {p.shape}, ground truth {g.shape}")
    return p, g


def mae(pred, gt) -> float:
    p, g = _pair(pred, gt)
    # exactly rounded sum keeps the value independent of array layout
    return math.fsum(np.abs(p - g).ravel().tolist()) / p.size


def pr_at_threshold(pred, gt, tau: float) -> tuple[float, float]:
    p, g = _pair(pred, gt)
    pos = p > tau
    truth = g == 1
    tp = int(np.count_nonzero(pos & truth))
    fp = int(np.count_nonzero(pos & ~truth))
    fn = int(np.count_nonzero(~pos & truth))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall


def fbeta(precision: float, recall: float, beta2: float = BETA2) -> float:
    denom = beta2 * precision + recall
    return (1 + beta2) * precision * recall / denom if denom else 0.0


def pr_curve(pred, gt, thresholds=None) -> tuple[np.ndarray, np.ndarray]:
    p, g = _pair(pred, gt)
    taus = default_thresholds() if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    truth = (g == 1).ravel()
    flat = p.ravel()
    n_true = int(truth.sum())
    # counts of predicted-positive pixels per threshold via sorted search
    pos_sorted = np.sort(flat[truth])
    neg_sorted = np.sort(flat[~truth])
    tp = pos_sorted.size - np.searchsorted(pos_sorted, taus, side="right")
    fp = neg_sorted.size - np.searchsorted(neg_sorted, taus, side="right")
    fn = n_true - tp
    precision = np.array([a / (a + b) if a + b else 0.0 for a, b in zip(tp.tolist(), fp.tolist())])
    recall = np.array([a / (a + b) if a + b else 0.0 for a, b in zip(tp.tolist(), fn.tolist())])
    return precision, recall


def max_fbeta(pred, gt, beta2: float = BETA2, thresholds=None) -> float:
    precision, recall = pr_curve(pred, gt, thresholds)
    return max(fbeta(p, r, beta2) for p, r in zip(precision.tolist(), recall.tolist()))


@dataclass
class MetricReport:
    mae: float
    max_fbeta: float
    precision: np.ndarray = field(repr=False)
    recall: np.ndarray = field(repr=False)
    beta2: float = BETA2


def evaluate_map(pred, gt, beta2: float = BETA2, thresholds=None) -> MetricReport:
    precision, recall = pr_curve(pred, gt, thresholds)
    best = max(fbeta(p, r, beta2) for p, r in zip(precision.tolist(), recall.tolist()))
    return MetricReport(mae(pred, gt), best, precision, recall, beta2)
