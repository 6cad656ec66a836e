"""Catalog of central-difference gradient checks over every differentiable op.

Each case builds a random small instance from a seeded generator, reduces the
op output to a scalar through a fixed random projection and checks the
gradient of every tensor input separately.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .autodiff import Tensor, bilinear_resize, conv2d, fully_connected, grad_check, logistic, make_rng, maxpool2
from .autodiff import relu, tanh
from .losses import bce_loss, iou_loss, recurrent_loss
from .ram import ConvGRUCell
from .sampler import crop_from_raw, grid_sample_bilinear

H = 1e-5
TOL = 1e-4
INSTANCES = 3


@dataclass
class CheckOutcome:
    op: str
    instance: int
    arg: str
    max_rel_error: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rel_error)) and self.max_rel_error < TOL


def _project(out: Tensor, rng: np.random.Generator) -> Tensor:
    return Tensor(rng.normal(size=out.shape))


def _checks(build: Callable, args: dict[str, np.ndarray], rng) -> Iterator[tuple[str, float]]:
    """``build(**tensors)`` returns the op output; each named arg is checked in turn."""
    tensors = {k: Tensor(v.copy()) for k, v in args.items()}
    proj = _project(build(**tensors), rng)
    for name in args:
        def fn(x, name=name):
            kw = dict(tensors)
            kw[name] = x
            return (build(**kw) * proj).sum()
        yield name, grad_check(fn, tensors[name], h=H, tol=TOL).max_rel_error


def _away_from_zero(rng, shape, gap=0.05):
    v = rng.normal(size=shape)
    return np.where(np.abs(v) < gap, np.sign(v + 1e-300) * gap + v, v)


def _distinct(rng, shape):
    # well-separated values so no max-pool window is near a tie
    n = int(np.prod(shape))
    return (rng.permutation(n) * 0.1 + rng.uniform(0, 0.01, n)).reshape(shape)


def case_conv2d(rng):
    yield from _checks(lambda x, w, b: conv2d(x, w, b, padding=1),
                       dict(x=rng.normal(size=(2, 2, 5, 5)), w=rng.normal(size=(3, 2, 3, 3)),
                            b=rng.normal(size=3)), rng)


def case_conv2d_dilated(rng):
    yield from _checks(lambda x, w, b: conv2d(x, w, b, padding=2, dilation=2),
                       dict(x=rng.normal(size=(1, 2, 6, 6)), w=rng.normal(size=(2, 2, 3, 3)),
                            b=rng.normal(size=2)), rng)


def case_maxpool2(rng):
    yield from _checks(lambda x: maxpool2(x), dict(x=_distinct(rng, (2, 2, 5, 6))), rng)


def case_fully_connected(rng):
    yield from _checks(lambda x, w, b: fully_connected(x, w, b),
                       dict(x=rng.normal(size=(3, 5)), w=rng.normal(size=(4, 5)), b=rng.normal(size=4)), rng)


def case_logistic(rng):
    yield from _checks(lambda x: logistic(x), dict(x=rng.normal(size=(4, 5)) * 2), rng)


def case_tanh(rng):
    yield from _checks(lambda x: tanh(x), dict(x=rng.normal(size=(4, 5)) * 2), rng)


def case_relu(rng):
    yield from _checks(lambda x: relu(x), dict(x=_away_from_zero(rng, (4, 5))), rng)


def case_bilinear_resize(rng):
    yield from _checks(lambda x: bilinear_resize(x, 7, 5), dict(x=rng.normal(size=(1, 2, 4, 3))), rng)


def case_crop_from_raw(rng):
    yield from _checks(lambda r: crop_from_raw(r, 0.6).coords, dict(r=rng.normal(size=(3, 4)) * 2), rng)


def case_grid_sample_bilinear(rng):
    # keep sample points off integer lattice lines where the interpolant has kinks
    cells = rng.integers(0, 4, size=(1, 3, 3, 2)).astype(float)
    grid = cells + rng.uniform(0.1, 0.9, size=cells.shape)
    yield from _checks(lambda img, grid: grid_sample_bilinear(img, grid),
                       dict(img=rng.normal(size=(1, 2, 5, 5)), grid=grid), rng)


def case_convgru_step(rng):
    cell = ConvGRUCell(2, 3, rng, kernel=3)
    for p in cell.parameters():
        p.data[...] = rng.normal(size=p.shape) * 0.5
    args = dict(x=rng.normal(size=(1, 2, 4, 4)), h=np.tanh(rng.normal(size=(1, 3, 4, 4))),
                W_h=cell.params["W_h"].data.copy(), U_z=cell.params["U_z"].data.copy(),
                b_r=cell.params["b_r"].data.copy())

    def build(x, h, W_h, U_z, b_r):
        saved = {k: cell.params[k] for k in ("W_h", "U_z", "b_r")}
        cell.params.update(W_h=W_h, U_z=U_z, b_r=b_r)
        try:
            return cell.step(x, h)
        finally:
            cell.params.update(saved)

    yield from _checks(build, args, rng)


def case_bce_loss(rng):
    target = rng.uniform(size=(2, 1, 3, 3))
    yield from _checks(lambda z: bce_loss(z, target), dict(z=rng.normal(size=(2, 1, 3, 3)) * 3), rng)


def case_iou_loss(rng):
    target = (rng.uniform(size=(2, 1, 3, 3)) > 0.5).astype(float)
    yield from _checks(lambda p: iou_loss(p, target), dict(p=rng.uniform(0.05, 0.95, size=(2, 1, 3, 3))), rng)


def case_recurrent_loss(rng):
    target = rng.uniform(size=(1, 1, 3, 3))
    yield from _checks(lambda a, b, c: recurrent_loss([a, b, c], target, 2.0),
                       {n: rng.normal(size=(1, 1, 3, 3)) for n in "abc"}, rng)


CASES: dict[str, Callable] = {
    "conv2d": case_conv2d,
    "conv2d_dilated": case_conv2d_dilated,
    "maxpool2": case_maxpool2,
    "fully_connected": case_fully_connected,
    "logistic": case_logistic,
    "tanh": case_tanh,
    "relu": case_relu,
    "bilinear_resize": case_bilinear_resize,
    "crop_from_raw": case_crop_from_raw,
    "grid_sample_bilinear": case_grid_sample_bilinear,
    "convgru_step": case_convgru_step,
    "bce_loss": case_bce_loss,
    "iou_loss": case_iou_loss,
    "recurrent_loss": case_recurrent_loss,
}


def run_gradchecks(ops=None, instances: int = INSTANCES, seed: int = 0) -> list[CheckOutcome]:
    names = list(CASES) if ops is None else list(ops)
    unknown = [n for n in names if n not in CASES]
    if unknown:
        raise KeyError(f"unknown op(s): {', '.join(unknown)}; known: {', '.join(CASES)}")
    out = []
    for idx, name in enumerate(CASES):
        if name not in names:
            continue
        for inst in range(instances):
            rng = make_rng(seed, idx, inst)
            for arg, err in CASES[name](rng):
                out.append(CheckOutcome(name, inst, arg, err))
    return out
