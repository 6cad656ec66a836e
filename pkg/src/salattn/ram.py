"""Recurrent aggregation of the feature bag with stacked convolutional GRUs.

The encoder GRU consumes one feature map per step; the decoder GRU consumes
the encoder's hidden state, and a 1x1 convolution of the decoder state gives
that step's saliency logits. The full-image features come first, so the
first prediction already sees the global context.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, concat, logistic, split, tanh, xavier_init, zeros_param
from .autodiff.functional import conv2d
from .nn import Module

GATES = ("z", "r", "h")


class ConvGRUCell(Module):
    def __init__(self, in_channels: int, hidden_channels: int, rng: np.random.Generator, kernel: int = 5):
        super().__init__()
        if kernel % 2 != 1:
            raise ValueError("ConvGRU kernel size must be odd to preserve extents")
        self.in_channels = in_channels
        self.hidden_channels = hidden_channels
        self.kernel = kernel
        for g in GATES:
            self.add_param(f"W_{g}", xavier_init((hidden_channels, in_channels, kernel, kernel), rng))
            self.add_param(f"U_{g}", xavier_init((hidden_channels, hidden_channels, kernel, kernel), rng))
            self.add_param(f"b_{g}", zeros_param((hidden_channels,)))

    def zero_state(self, batch: int, h: int, w: int) -> Tensor:
        return Tensor(np.zeros((batch, self.hidden_channels, h, w)))

    def step(self, x: Tensor, h_prev: Tensor) -> Tensor:
        p = self.params
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(f"ConvGRU input must have {self.in_channels} channels, got shape {x.shape}")
        if h_prev.shape != (x.shape[0], self.hidden_channels) + x.shape[2:]:
            raise ValueError(f"hidden state shape {h_prev.shape} inconsistent with input {x.shape}")
        pad = self.kernel // 2
        # one convolution over x for all three gates, one over h for z and r
        wx = conv2d(x, concat([p["W_z"], p["W_r"], p["W_h"]], axis=0),
                    concat([p["b_z"], p["b_r"], p["b_h"]], axis=0), padding=pad)
        uh = conv2d(h_prev, concat([p["U_z"], p["U_r"]], axis=0), None, padding=pad)
        wx_z, wx_r, wx_h = split(wx, 3, axis=1)
        uh_z, uh_r = split(uh, 2, axis=1)
        z = logistic(wx_z + uh_z)
        r = logistic(wx_r + uh_r)
        cand = tanh(wx_h + conv2d(r * h_prev, p["U_h"], None, padding=pad))
        return (1.0 - z) * h_prev + z * cand

    def gates(self, x: Tensor, h_prev: Tensor) -> tuple[np.ndarray, np.ndarray]:
        """Numeric values of the update and reset gates, for inspection."""
        p = self.params
        pad = self.kernel // 2
        z = logistic(conv2d(x, p["W_z"], p["b_z"], padding=pad) + conv2d(h_prev, p["U_z"], None, padding=pad))
        r = logistic(conv2d(x, p["W_r"], p["b_r"], padding=pad) + conv2d(h_prev, p["U_r"], None, padding=pad))
        return z.data, r.data


def convgru_step(cell: ConvGRUCell, x: Tensor, h_prev: Tensor) -> Tensor:
    return cell.step(x, h_prev)


class RecurrentAttention(Module):
    def __init__(self, feature_channels: int, rng: np.random.Generator, hidden_channels: int | None = None,
                 kernel: int = 5):
        super().__init__()
        hid = hidden_channels or feature_channels
        self.feature_channels = feature_channels
        self.hidden_channels = hid
        self.encoder = self.add_module("enc", ConvGRUCell(feature_channels, hid, rng, kernel))
        self.decoder = self.add_module("dec", ConvGRUCell(hid, hid, rng, kernel))
        self.add_conv("head", hid, 1, 1, rng)

    def rollout(self, features: list[Tensor]) -> list[Tensor]:
        """Feed ``F_0 .. F_N`` in order; return one ``(B, 1, h, w)`` logit map per step."""
        if not features:
            raise ValueError("ram_rollout needs at least one feature map")
        b, _, h, w = features[0].shape
        h_enc = self.encoder.zero_state(b, h, w)
        h_dec = self.decoder.zero_state(b, h, w)
        preds = []
        for f in features:
            h_enc = self.encoder.step(f, h_enc)
            h_dec = self.decoder.step(h_enc, h_dec)
            preds.append(self.conv("head", h_dec))
        return preds

    __call__ = rollout


def ram_rollout(features: list[Tensor], ram: RecurrentAttention) -> list[Tensor]:
    return ram.rollout(features)
