"""Seeded random streams and Xavier-uniform initialization.

Randomness comes from numpy's PCG64 bit generator, which is documented and
reproduces bit-identical streams for equal seeds.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import Tensor


def make_rng(seed, *stream: int) -> np.random.Generator:
    """Independent PCG64 stream keyed by ``(seed, *stream)``."""
    return np.random.Generator(np.random.PCG64([int(seed), *map(int, stream)]))


def fans(shape: Sequence[int]) -> tuple[int, int]:
    """Fan-in/fan-out; 4-D shapes are ``(out, in, kh, kw)`` kernels."""
    shape = tuple(shape)
    if len(shape) == 0 or any(s <= 0 for s in shape):
        raise ValueError(f"xavier_init needs a non-empty shape of positive extents, got {shape}")
    if len(shape) == 1:
        return shape[0], shape[0]
    if len(shape) == 2:
        return shape[1], shape[0]
    receptive = int(np.prod(shape[2:]))
    return shape[1] * receptive, shape[0] * receptive


def xavier_init(shape: Sequence[int], rng: np.random.Generator, name: str | None = None,
                gain: float = 1.0) -> Tensor:
    """Uniform on ``+-gain * sqrt(6 / (fan_in + fan_out))``."""
    fan_in, fan_out = fans(shape)
    a = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-a, a, size=tuple(shape)), requires_grad=True, name=name)


def zeros_param(shape: Sequence[int], name: str | None = None) -> Tensor:
    return Tensor(np.zeros(tuple(shape)), requires_grad=True, name=name)
