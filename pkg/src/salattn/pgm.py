"""Patch generation: a shared localization trunk with one crop regressor per patch."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, bilinear_resize, concat, fully_connected, maxpool2, relu, stack, xavier_init, zeros_param
from .autodiff.tensor import reshape
from .nn import Module
from .sampler import DEFAULT_EPS, CropBox, crop_and_resize, crop_from_raw


class LocalizationNet(Module):
    """conv7x7 -> pool -> conv5x5 -> pool -> FC(256) -> N unshared FC(4) heads."""

    def __init__(self, num_patches: int, rng: np.random.Generator, loc_size: int = 64,
                 channels: int = 64, hidden: int = 256, eps: float = DEFAULT_EPS):
        super().__init__()
        if num_patches < 1:
            raise ValueError("num_patches must be >= 1")
        if loc_size % 4:
            raise ValueError("loc_size must be divisible by 4")
        self.num_patches = num_patches
        self.loc_size = loc_size
        self.eps = eps
        self.add_conv("conv1", 3, channels, 7, rng)
        self.add_conv("conv2", channels, channels, 5, rng)
        flat = channels * (loc_size // 4) ** 2
        self.add_param("fc.weight", xavier_init((hidden, flat), rng))
        self.add_param("fc.bias", zeros_param((hidden,)))
        for k in range(num_patches):
            self.add_param(f"head{k}.weight", xavier_init((4, hidden), rng))
            self.add_param(f"head{k}.bias", zeros_param((4,)))

    def trunk(self, image: Tensor) -> Tensor:
        if image.ndim != 4 or image.shape[1] != 3:
            raise ValueError(f"localization net expects (B, 3, H, W) input, got {image.shape}")
        x = bilinear_resize(image, self.loc_size, self.loc_size)
        x = maxpool2(relu(self.conv("conv1", x, padding=3)))
        x = maxpool2(relu(self.conv("conv2", x, padding=2)))
        x = reshape(x, (x.shape[0], -1))
        return relu(fully_connected(x, self.params["fc.weight"], self.params["fc.bias"]))

    def raw(self, image: Tensor) -> Tensor:
        """Unconstrained crop parameters, shape ``(B, N, 4)``."""
        feat = self.trunk(image)
        heads = [fully_connected(feat, self.params[f"head{k}.weight"], self.params[f"head{k}.bias"])
                 for k in range(self.num_patches)]
        return stack(heads, axis=1)

    def forward(self, image: Tensor) -> CropBox:
        return crop_from_raw(self.raw(image), self.eps)

    __call__ = forward


def locnet_forward(image: Tensor, net: LocalizationNet) -> CropBox:
    return net.forward(image)


@dataclass
class PatchBag:
    """``images`` is ``(N+1, 3, H, W)`` with the untouched input at index 0."""

    images: Tensor
    boxes: CropBox

    def __len__(self) -> int:
        return self.images.shape[0]


def generate_patch_bag(image: Tensor, boxes: CropBox) -> PatchBag:
    """Crop one image ``(1, 3, H, W)`` with ``(N, 4)`` boxes and prepend the original."""
    if image.ndim == 3:
        image = reshape(image, (1,) + image.shape)
    if image.shape[0] != 1:
        raise ValueError("generate_patch_bag works on a single image")
    coords = boxes.coords
    if coords.ndim == 1:
        coords = reshape(coords, (1, 4))
    h, w = image.shape[2:]
    patches = crop_and_resize(image, CropBox(coords, boxes.eps), h, w)
    return PatchBag(concat([image, patches], axis=0), CropBox(coords, boxes.eps))
