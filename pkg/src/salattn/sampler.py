"""Constrained crop boxes and differentiable bilinear grid sampling.

A crop is parameterized by four unconstrained values. Width and height are
squashed into ``[eps, 1]`` and the offsets into the remaining slack, so every
raw vector maps to a box that already satisfies the minimum-extent
constraint. Sampling uses the align-corners convention: the corners of the
output lattice land exactly on the box corners in source pixel space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, as_tensor, concat, logistic
from .autodiff.tensor import reshape

DEFAULT_EPS = 0.6
_EXTENT_GUARD = 8 * np.finfo(np.float64).eps


@dataclass
class CropBox:
    """Normalized crop ``(x1, y1, x2, y2)``; ``coords`` is a ``(4,)`` or ``(B, 4)`` tensor."""

    coords: Tensor
    eps: float = DEFAULT_EPS

    @property
    def values(self) -> np.ndarray:
        return self.coords.data

    def validate(self, slack: float = 1e-12) -> None:
        v = np.atleast_2d(self.values)
        x1, y1, x2, y2 = v.T
        if np.any(x1 < -slack) or np.any(y1 < -slack) or np.any(x2 > 1 + slack) or np.any(y2 > 1 + slack):
            raise ValueError("crop box leaves the unit square")
        if np.any(x2 - x1 < self.eps - slack) or np.any(y2 - y1 < self.eps - slack):
            raise ValueError(f"crop box narrower than eps={self.eps}")

    @classmethod
    def fixed(cls, x1: float, y1: float, x2: float, y2: float, eps: float = 0.0) -> "CropBox":
        box = cls(Tensor([x1, y1, x2, y2]), eps)
        box.validate()
        if not (x1 < x2 and y1 < y2):
            raise ValueError("degenerate crop box")
        return box


def crop_from_raw(raw: Tensor, eps: float = DEFAULT_EPS) -> CropBox:
    """Map raw ``(..., 4)`` regressor outputs onto boxes with both extents >= eps."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    raw = as_tensor(raw)
    if raw.shape[-1] != 4:
        raise ValueError(f"crop_from_raw expects trailing extent 4, got {raw.shape}")
    s = logistic(raw)
    sx, sy, sw, sh = (s[..., i:i + 1] for i in range(4))
    # a few ulps of headroom so the rounded difference x2 - x1 never dips below eps
    lo = eps + _EXTENT_GUARD
    w = sw * (1.0 - lo) + lo
    h = sh * (1.0 - lo) + lo
    x1 = sx * (1.0 - w)
    y1 = sy * (1.0 - h)
    coords = concat([x1, y1, x1 + w, y1 + h], axis=-1)
    return CropBox(coords, eps)


def _lattice(n: int) -> np.ndarray:
    if n == 1:
        return np.array([0.5])
    return np.arange(n) / (n - 1)


def make_grid(box: CropBox, out_h: int, out_w: int, src_h: int, src_w: int) -> Tensor:
    """Source pixel coordinates for every output pixel.

    Returns a ``(B, out_h, out_w, 2)`` tensor whose last axis is
    ``(u, v)`` = (column, row), differentiable with respect to the box.
    """
    if min(out_h, out_w, src_h, src_w) < 1:
        raise ValueError("make_grid needs positive output and source extents")
    c = box.coords
    if c.ndim == 1:
        c = reshape(c, (1, 4))
    b = c.shape[0]
    x1, y1, x2, y2 = (c[:, i:i + 1] for i in range(4))
    tx = Tensor(_lattice(out_w)[None, :])
    ty = Tensor(_lattice(out_h)[None, :])
    u = (x1 + (x2 - x1) * tx) * float(src_w - 1)  # (B, out_w)
    v = (y1 + (y2 - y1) * ty) * float(src_h - 1)  # (B, out_h)
    u_full = reshape(u, (b, 1, out_w, 1)) + Tensor(np.zeros((1, out_h, 1, 1)))
    v_full = reshape(v, (b, out_h, 1, 1)) + Tensor(np.zeros((1, 1, out_w, 1)))
    return concat([u_full, v_full], axis=-1)


def identity_grid(h: int, w: int) -> Tensor:
    """Integer pixel lattice of an ``h x w`` image, shape ``(1, h, w, 2)``."""
    vv, uu = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    return Tensor(np.stack([uu, vv], axis=-1)[None])


def grid_sample_bilinear(image: Tensor, grid: Tensor) -> Tensor:
    """Bilinear lookup of ``image`` (N, C, H, W) at ``grid`` (N or 1, Ho, Wo, 2).

    Coordinates outside the image are clamped to the border first; the
    clamped coordinates carry no gradient. The gradient reaches the image
    through the four interpolation weights of each sample and the grid
    through the weights' dependence on the fractional position.
    """
    image, grid = as_tensor(image), as_tensor(grid)
    if image.ndim != 4 or grid.ndim != 4 or grid.shape[-1] != 2:
        raise ValueError(f"grid_sample_bilinear expects NCHW image and (N, Ho, Wo, 2) grid, "
                         f"got {image.shape} and {grid.shape}")
    n, c, h, w = image.shape
    gn = grid.shape[0]
    if gn not in (1, n) and n != 1:
        raise ValueError(f"grid batch {gn} incompatible with image batch {n}")
    nb = max(n, gn)
    img = np.broadcast_to(image.data, (nb, c, h, w))
    g = np.broadcast_to(grid.data, (nb,) + grid.shape[1:])
    u_raw, v_raw = g[..., 0], g[..., 1]
    u = np.clip(u_raw, 0.0, w - 1.0)
    v = np.clip(v_raw, 0.0, h - 1.0)
    in_u = (u_raw >= 0.0) & (u_raw <= w - 1.0)
    in_v = (v_raw >= 0.0) & (v_raw <= h - 1.0)
    x0 = np.clip(np.floor(u).astype(np.intp), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(v).astype(np.intp), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = u - x0
    fy = v - y0
    bidx = np.arange(nb)[:, None, None]

    def gather(yy, xx):
        # (nb, Ho, Wo, C)
        return img.transpose(0, 2, 3, 1)[bidx, yy, xx]

    i00, i01, i10, i11 = gather(y0, x0), gather(y0, x1), gather(y1, x0), gather(y1, x1)
    wx, wy = fx[..., None], fy[..., None]
    out = ((1 - wy) * ((1 - wx) * i00 + wx * i01) + wy * ((1 - wx) * i10 + wx * i11))
    out = out.transpose(0, 3, 1, 2)

    def bw(gout):
        go = gout.transpose(0, 2, 3, 1)  # (nb, Ho, Wo, C)
        gimg = ggrid = None
        if image.requires_grad:
            acc = np.zeros((nb, h, w, c))
            for yy, xx, wt in ((y0, x0, (1 - wy) * (1 - wx)), (y0, x1, (1 - wy) * wx),
                               (y1, x0, wy * (1 - wx)), (y1, x1, wy * wx)):
                np.add.at(acc, (np.broadcast_to(bidx, yy.shape), yy, xx), go * wt)
            acc = acc.transpose(0, 3, 1, 2)
            gimg = acc if n == nb else acc.sum(axis=0, keepdims=True)
        if grid.requires_grad:
            du = ((1 - wy) * (i01 - i00) + wy * (i11 - i10)) * go
            dv = ((1 - wx) * (i10 - i00) + wx * (i11 - i01)) * go
            gu = du.sum(axis=-1) * in_u
            gv = dv.sum(axis=-1) * in_v
            ggrid = np.stack([gu, gv], axis=-1)
            if gn != nb:
                ggrid = ggrid.sum(axis=0, keepdims=True)
        return gimg, ggrid

    return Tensor._from_op(np.ascontiguousarray(out), (image, grid), bw)


def crop_and_resize(image: Tensor, box: CropBox, out_h: int, out_w: int) -> Tensor:
    h, w = image.shape[-2:]
    return grid_sample_bilinear(image, make_grid(box, out_h, out_w, h, w))
