"""Dilated VGG-style saliency feature extractor with output stride 8.

Blocks 1-3 halve the resolution with max pooling; blocks 4 and 5 keep it
and widen the receptive field with dilated 3x3 convolutions instead. An
extra 3x3 convolution follows block 5. The outputs of block 3, 4, 5 and the
extra layer are each passed through parallel 1x1 / 3x3 / 5x5 branches,
concatenated, and projected to ``feature_channels`` with a 1x1 convolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat, maxpool2, relu
from .nn import Module


@dataclass(frozen=True)
class BackboneConfig:
    base_channels: int = 8
    dilation4: int = 2
    dilation5: int = 4
    feature_channels: int = 64
    branch_channels: int = 0  # 0 -> 2 * base_channels

    def __post_init__(self):
        if self.base_channels < 1 or self.feature_channels < 4:
            raise ValueError("base_channels must be >= 1 and feature_channels >= 4")
        if self.feature_channels % 4:
            raise ValueError(f"feature_channels must be divisible by 4, got {self.feature_channels}")
        if self.dilation4 < 1 or self.dilation5 < 1:
            raise ValueError("dilation rates must be >= 1")

    @property
    def branch(self) -> int:
        return self.branch_channels or 2 * self.base_channels


# (block, convs, width multiplier, pool after, dilation attribute)
_BLOCKS = (
    ("b1", 2, 1, True, None),
    ("b2", 2, 2, True, None),
    ("b3", 3, 4, True, None),
    ("b4", 3, 8, False, "dilation4"),
    ("b5", 3, 8, False, "dilation5"),
)
_FUSE_KERNELS = (1, 3, 5)
# Xavier bound scaled for relu so activations keep their scale through the 14-conv stack
RELU_GAIN = float(np.sqrt(2.0))


class SaliencyBackbone(Module):
    def __init__(self, cfg: BackboneConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        c_in = 3
        for block, n_conv, mult, _, _ in _BLOCKS:
            width = mult * cfg.base_channels
            for i in range(n_conv):
                self.add_conv(f"{block}.conv{i}", c_in, width, 3, rng, gain=RELU_GAIN)
                c_in = width
        self.add_conv("extra", c_in, c_in, 3, rng, gain=RELU_GAIN)
        sources = (4 * cfg.base_channels, 8 * cfg.base_channels, 8 * cfg.base_channels, 8 * cfg.base_channels)
        for s, c_src in enumerate(sources):
            for k in _FUSE_KERNELS:
                self.add_conv(f"fuse{s}.k{k}", c_src, cfg.branch, k, rng, gain=RELU_GAIN)
        self.add_conv("project", len(sources) * len(_FUSE_KERNELS) * cfg.branch, cfg.feature_channels, 1, rng)

    def forward(self, image: Tensor) -> Tensor:
        """Map ``(B, 3, H, W)`` images to ``(B, F, H/8, W/8)`` features."""
        if image.ndim != 4 or image.shape[1] != 3:
            raise ValueError(f"backbone expects (B, 3, H, W) input, got {image.shape}")
        h, w = image.shape[2:]
        if h % 8 or w % 8:
            raise ValueError(f"input extents must be divisible by 8, got {h}x{w}")
        x = image
        taps = []
        for block, n_conv, _, pool, dil_attr in _BLOCKS:
            d = getattr(self.cfg, dil_attr) if dil_attr else 1
            for i in range(n_conv):
                x = relu(self.conv(f"{block}.conv{i}", x, padding=d, dilation=d))
            if pool:
                x = maxpool2(x)
            if block in ("b3", "b4", "b5"):
                taps.append(x)
        x = relu(self.conv("extra", x, padding=1))
        taps.append(x)
        branches = []
        for s, t in enumerate(taps):
            for k in _FUSE_KERNELS:
                branches.append(relu(self.conv(f"fuse{s}.k{k}", t, padding=k // 2)))
        return self.conv("project", concat(branches, axis=1))

    __call__ = forward


class DecodeHead(Module):
    """Temporary three-layer saliency decoder used while pre-training the backbone."""

    def __init__(self, feature_channels: int, rng: np.random.Generator):
        super().__init__()
        f = feature_channels
        if f % 4:
            raise ValueError(f"feature_channels must be divisible by 4, got {f}")
        self.feature_channels = f
        self.add_conv("conv0", f, f // 2, 3, rng, gain=RELU_GAIN)
        self.add_conv("conv1", f // 2, f // 4, 3, rng, gain=RELU_GAIN)
        self.add_conv("conv2", f // 4, 1, 1, rng)

    def forward(self, features: Tensor) -> Tensor:
        if features.ndim != 4 or features.shape[1] != self.feature_channels:
            raise ValueError(f"decode head expects {self.feature_channels} channels, got shape {features.shape}")
        x = relu(self.conv("conv0", features, padding=1))
        x = relu(self.conv("conv1", x, padding=1))
        return self.conv("conv2", x)

    __call__ = forward


def spm_forward(image: Tensor, backbone: SaliencyBackbone) -> Tensor:
    return backbone.forward(image)
