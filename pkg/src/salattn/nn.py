"""Named-parameter container shared by the network modules."""

from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from .autodiff import Tensor, conv2d, xavier_init, zeros_param


class Module:
    """Holds an ordered ``name -> Tensor`` parameter table.

    Sub-modules register under a prefix, so ``named_parameters`` yields
    dotted names such as ``b3.conv1.weight`` that double as checkpoint keys.
    """

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.children: dict[str, Module] = {}

    def add_param(self, name: str, t: Tensor) -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        t.name = name
        self.params[name] = t
        return t

    def add_module(self, name: str, m: "Module") -> "Module":
        self.children[name] = m
        return m

    def add_conv(self, name: str, c_in: int, c_out: int, k: int, rng: np.random.Generator, bias: bool = True,
                 gain: float = 1.0) -> None:
        self.add_param(f"{name}.weight", xavier_init((c_out, c_in, k, k), rng, gain=gain))
        if bias:
            self.add_param(f"{name}.bias", zeros_param((c_out,)))

    def conv(self, name: str, x: Tensor, padding: int = 0, dilation: int = 1) -> Tensor:
        return conv2d(x, self.params[f"{name}.weight"], self.params.get(f"{name}.bias"),
                      stride=1, padding=padding, dilation=dilation)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, p in self.params.items():
            yield prefix + name, p
        for cname, child in self.children.items():
            yield from child.named_parameters(f"{prefix}{cname}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters(prefix)}

    def load_state_dict(self, state: Mapping[str, np.ndarray], prefix: str = "") -> None:
        own = dict(self.named_parameters(prefix))
        missing = [k for k in own if k not in state]
        if missing:
            raise KeyError(f"checkpoint lacks parameters: {missing[:5]}{'...' if len(missing) > 5 else ''}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: checkpoint {arr.shape}, model {p.shape}")
            p.data = arr.copy()

    def requires_grad_(self, flag: bool) -> "Module":
        for p in self.parameters():
            p.requires_grad = flag
            if not flag:
                p.grad = None
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None
