"""Adam with bias correction, one state object per parameter."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def like(cls, param: Tensor, lr: float = 1e-3, **kw) -> "AdamState":
        return cls(np.zeros_like(param.data), np.zeros_like(param.data), lr=lr, **kw)


def adam_step(param: Tensor, state: AdamState) -> None:
    """Apply one in-place Adam update; the caller zeroes ``param.grad``."""
    if param.grad is None:
        raise ValueError(f"adam_step: parameter {param.name or ''} has no gradient")
    if state.m.shape != param.shape:
        raise ValueError(f"adam_step: state shape {state.m.shape} != parameter shape {param.shape}")
    g = param.grad
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * g
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    param.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class Adam:
    """Adam over named parameter groups, each with its own learning rate."""

    groups: dict[str, list[Tensor]]
    lrs: dict[str, float]
    states: dict[int, AdamState] = field(default_factory=dict)

    def __post_init__(self):
        for gname, params in self.groups.items():
            for p in params:
                self.states[id(p)] = AdamState.like(p, lr=self.lrs[gname])

    def set_lr(self, group: str, lr: float) -> None:
        self.lrs[group] = lr
        for p in self.groups[group]:
            self.states[id(p)].lr = lr

    def scale_lr(self, factor: float) -> None:
        for g in list(self.lrs):
            self.set_lr(g, self.lrs[g] * factor)

    def step(self) -> None:
        for params in self.groups.values():
            for p in params:
                if p.grad is not None:
                    adam_step(p, self.states[id(p)])

    def zero_grad(self) -> None:
        for params in self.groups.values():
            for p in params:
                p.grad = None
