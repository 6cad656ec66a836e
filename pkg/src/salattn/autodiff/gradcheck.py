"""Central-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor import Tensor, no_grad


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rel_error)) and self.max_rel_error < self.tol

    def __float__(self) -> float:
        return self.max_rel_error


def numerical_grad(fn: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> np.ndarray:
    flat = x.data.reshape(-1)
    out = np.zeros_like(flat)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            hi, lo = orig + h, orig - h
            flat[i] = hi
            fp = fn(x).item()
            flat[i] = lo
            fm = fn(x).item()
            flat[i] = orig
            # divide by the representable step, not the nominal 2h
            out[i] = (fp - fm) / (hi - lo)
    return out.reshape(x.shape)


def grad_check(fn: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5, tol: float = 1e-4) -> GradCheckResult:
    """Compare the backward-pass gradient of scalar ``fn`` at ``x`` to central differences.

    The per-coordinate relative error uses ``max(|a|, |n|, 1e-8)`` as the
    denominator; the maximum over coordinates is reported.
    """
    was = x.requires_grad
    x.requires_grad = True
    x.grad = None
    loss = fn(x)
    loss.backward()
    analytic = x.grad if x.grad is not None else np.zeros_like(x.data)
    x.grad = None
    x.requires_grad = was
    numeric = numerical_grad(fn, x, h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    err = float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
    return GradCheckResult(err, tol)
