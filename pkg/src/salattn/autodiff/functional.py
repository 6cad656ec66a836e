"""Differentiable neural-network kernels on NCHW tensors."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, as_tensor


def _pair_out(size: int, k: int, stride: int, padding: int, dilation: int) -> int:
    return (size + 2 * padding - dilation * (k - 1) - 1) // stride + 1


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0, dilation: int = 1) -> Tensor:
    """2-D cross-correlation with zero padding.

    ``x`` is ``(N, C, H, W)``, ``weight`` is ``(O, C, k, k)`` and ``bias``
    is ``(O,)``. The taps are gathered into a column matrix so the
    contraction is a single BLAS matmul; the input gradient scatters the
    column gradient back one tap at a time.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    o, ci, kh, kw = weight.shape
    if ci != c:
        raise ValueError(f"conv2d channel mismatch: input has {c}, weight expects {ci}")
    if stride < 1 or dilation < 1 or padding < 0:
        raise ValueError("conv2d needs stride >= 1, dilation >= 1, padding >= 0")
    ho = _pair_out(h, kh, stride, padding, dilation)
    wo = _pair_out(w, kw, stride, padding, dilation)
    if ho < 1 or wo < 1:
        raise ValueError(f"conv2d output extent non-positive ({ho}x{wo}) for input {h}x{w}")
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (o,):
            raise ValueError(f"conv2d bias must have shape ({o},), got {bias.shape}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    hspan = stride * (ho - 1) + 1
    wspan = stride * (wo - 1) + 1
    # cols: (N, Ho, Wo, C, kh, kw)
    cols = np.empty((n, ho, wo, c, kh, kw), dtype=x.data.dtype)
    for i in range(kh):
        for j in range(kw):
            r0, c0 = i * dilation, j * dilation
            patch = xp[:, :, r0:r0 + hspan:stride, c0:c0 + wspan:stride]
            cols[:, :, :, :, i, j] = patch.transpose(0, 2, 3, 1)
    cols2 = cols.reshape(n * ho * wo, c * kh * kw)
    wmat = weight.data.reshape(o, c * kh * kw)
    out = cols2 @ wmat.T
    if bias is not None:
        out += bias.data
    out = out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def bw(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, o)
        gx = gw = gb = None
        if weight.requires_grad:
            gw = (g2.T @ cols2).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g2.sum(axis=0)
        if x.requires_grad:
            dcols = (g2 @ wmat).reshape(n, ho, wo, c, kh, kw)
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    r0, c0 = i * dilation, j * dilation
                    dxp[:, :, r0:r0 + hspan:stride, c0:c0 + wspan:stride] += \
                        dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            gx = dxp[:, :, padding:padding + h, padding:padding + w] if padding else dxp
        return (gx, gw) if bias is None else (gx, gw, gb)

    return Tensor._from_op(np.ascontiguousarray(out), parents, bw)


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; an odd trailing row/column is dropped.

    Ties resolve to the first element of the window in row-major order.
    """
    if x.ndim != 4:
        raise ValueError(f"maxpool2 expects NCHW input, got shape {x.shape}")
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise ValueError(f"maxpool2 needs spatial extents >= 2, got {h}x{w}")
    ho, wo = h // 2, w // 2
    win = x.data[:, :, :2 * ho, :2 * wo].reshape(n, c, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(n, c, ho, wo, 4)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]

    def bw(g):
        gwin = np.zeros((n, c, ho, wo, 4), dtype=g.dtype)
        np.put_along_axis(gwin, arg[..., None], g[..., None], axis=-1)
        gwin = gwin.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * ho, 2 * wo)
        if 2 * ho == h and 2 * wo == w:
            return (gwin,)
        gx = np.zeros_like(x.data)
        gx[:, :, :2 * ho, :2 * wo] = gwin
        return (gx,)

    return Tensor._from_op(out, (x,), bw)


def fully_connected(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map ``x @ weight.T + bias``; ``x`` is ``(B, in)`` or ``(in,)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    squeeze = x.ndim == 1
    xd = x.data[None, :] if squeeze else x.data
    if weight.ndim != 2 or xd.shape[-1] != weight.shape[1]:
        raise ValueError(f"fully_connected extent mismatch: input {x.shape}, weight {weight.shape}")
    out = xd @ weight.data.T
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise ValueError(f"fully_connected bias must have shape ({weight.shape[0]},), got {bias.shape}")
        out = out + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def bw(g):
        g2 = g[None, :] if squeeze else g
        gx = g2 @ weight.data if x.requires_grad else None
        if gx is not None and squeeze:
            gx = gx[0]
        gw = g2.T @ xd if weight.requires_grad else None
        if bias is None:
            return gx, gw
        gb = g2.sum(axis=0) if bias.requires_grad else None
        return gx, gw, gb

    return Tensor._from_op(out[0] if squeeze else out, parents, bw)


def _logistic_np(v: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def logistic(x: Tensor) -> Tensor:
    s = _logistic_np(x.data)

    def bw(g):
        return (g * s * (1.0 - s),)

    return Tensor._from_op(s, (x,), bw)


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)

    def bw(g):
        return (g * (1.0 - t * t),)

    return Tensor._from_op(t, (x,), bw)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def bw(g):
        return (g * mask,)

    return Tensor._from_op(np.where(mask, x.data, 0.0), (x,), bw)


_ACTIVATIONS = {"logistic": logistic, "sigmoid": logistic, "tanh": tanh, "relu": relu}


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}; choose from logistic, tanh, relu") from None
    return fn(x)


def interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Align-corners linear interpolation weights, shape ``(n_out, n_in)``."""
    m = np.zeros((n_out, n_in))
    if n_in == 1:
        m[:, 0] = 1.0
        return m
    if n_out == 1:
        pos = np.array([(n_in - 1) / 2.0])
    else:
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.clip(np.floor(pos).astype(int), 0, n_in - 2)
    frac = pos - lo
    rows = np.arange(n_out)
    m[rows, lo] += 1.0 - frac
    m[rows, lo + 1] += frac
    return m


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Align-corners bilinear resize of the two trailing axes."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"bilinear_resize target must be positive, got {out_h}x{out_w}")
    h, w = x.shape[-2:]
    if (h, w) == (out_h, out_w):
        ry = rx = None
        out = x.data.copy()
    else:
        ry = interp_matrix(h, out_h)
        rx = interp_matrix(w, out_w)
        out = ry @ x.data @ rx.T

    def bw(g):
        if ry is None:
            return (g,)
        return (ry.T @ g @ rx,)

    return Tensor._from_op(out, (x,), bw)
