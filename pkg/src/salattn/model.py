"""Full pipeline: patch generator -> saliency backbone -> recurrent aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, bilinear_resize, logistic, make_rng
from .pgm import LocalizationNet, PatchBag, generate_patch_bag
from .ram import RecurrentAttention
from .sampler import CropBox
from .spm import BackboneConfig, DecodeHead, SaliencyBackbone

# checkpoint scalars describing the architecture
META_KEYS = ("base_channels", "feature_channels", "branch_channels", "hidden_channels", "dilation4", "dilation5",
             "num_patches", "epsilon", "loc_size", "loc_channels", "loc_hidden", "gru_kernel")
_INT_META = set(META_KEYS) - {"epsilon"}


@dataclass
class Forward:
    boxes: CropBox
    bag: PatchBag
    preds: list[Tensor]  # per-step logits at 1/8 resolution


class SalientModel:
    """Owns the three modules plus the optional stage-1 decode head.

    Parameter names carry the module prefix (``spm.``, ``head.``, ``pgm.``,
    ``ram.``) and are used verbatim as checkpoint keys.
    """

    def __init__(self, arch: dict, seed: int = 0, with_head: bool = False, with_recurrent: bool = True):
        self.arch = dict(arch)
        a = self.arch
        self.backbone = SaliencyBackbone(
            BackboneConfig(a["base_channels"], a["dilation4"], a["dilation5"], a["feature_channels"],
                           a["branch_channels"]), make_rng(seed, 1))
        self.head = DecodeHead(a["feature_channels"], make_rng(seed, 2)) if with_head else None
        self.pgm = self.ram = None
        if with_recurrent:
            self.pgm = LocalizationNet(a["num_patches"], make_rng(seed, 3), loc_size=a["loc_size"],
                                       channels=a["loc_channels"], hidden=a["loc_hidden"], eps=a["epsilon"])
            self.ram = RecurrentAttention(a["feature_channels"], make_rng(seed, 4),
                                          hidden_channels=a["hidden_channels"] or a["feature_channels"],
                                          kernel=a["gru_kernel"])

    @classmethod
    def from_config(cls, cfg, **kw) -> "SalientModel":
        return cls({k: getattr(cfg, k) for k in META_KEYS}, seed=cfg.seed, **kw)

    # -- parameters --------------------------------------------------------
    def groups(self) -> dict[str, list[Tensor]]:
        out = {"spm": self.backbone.parameters()}
        if self.head is not None:
            out["head"] = self.head.parameters()
        if self.pgm is not None:
            out["pgm"] = self.pgm.parameters()
            out["ram"] = self.ram.parameters()
        return out

    def named_parameters(self):
        yield from self.backbone.named_parameters("spm.")
        if self.head is not None:
            yield from self.head.named_parameters("head.")
        if self.pgm is not None:
            yield from self.pgm.named_parameters("pgm.")
            yield from self.ram.named_parameters("ram.")

    def state(self) -> dict[str, np.ndarray]:
        out = {f"meta.{k}": np.array([float(self.arch[k])]) for k in META_KEYS}
        out.update({name: p.data.copy() for name, p in self.named_parameters()})
        return out

    def load(self, state: dict[str, np.ndarray], parts=("spm", "head", "pgm", "ram")) -> None:
        mods = {"spm": self.backbone, "head": self.head, "pgm": self.pgm, "ram": self.ram}
        for part in parts:
            if mods[part] is not None:
                mods[part].load_state_dict(state, f"{part}.")

    @classmethod
    def from_state(cls, state: dict[str, np.ndarray], with_head: bool | None = None,
                   with_recurrent: bool | None = None) -> "SalientModel":
        try:
            arch = {k: state[f"meta.{k}"].reshape(-1)[0].item() for k in META_KEYS}
        except KeyError as exc:
            raise ValueError(f"checkpoint lacks architecture record {exc}") from None
        arch = {k: int(v) if k in _INT_META else float(v) for k, v in arch.items()}
        if with_head is None:
            with_head = any(k.startswith("head.") for k in state)
        if with_recurrent is None:
            with_recurrent = any(k.startswith("ram.") for k in state)
        model = cls(arch, with_head=with_head, with_recurrent=with_recurrent)
        parts = ["spm"] + (["head"] if with_head else []) + (["pgm", "ram"] if with_recurrent else [])
        model.load(state, parts)
        return model

    # -- forward passes ------------------------------------------------------
    def stage1_logits(self, images: Tensor) -> Tensor:
        return self.head(self.backbone(images))

    def forward_one(self, image: Tensor) -> Forward:
        """Run PGM -> SPM -> RAM on a single ``(1, 3, H, W)`` image."""
        if self.pgm is None:
            raise ValueError("model has no patch generator / recurrent module")
        boxes = self.pgm(image)
        box = CropBox(boxes.coords[0], boxes.eps)
        bag = generate_patch_bag(image, box)
        feats = self.backbone(bag.images)
        preds = self.ram.rollout([feats[k:k + 1] for k in range(feats.shape[0])])
        return Forward(box, bag, preds)


def upsample_probs(logits: Tensor, h: int, w: int) -> np.ndarray:
    """Logistic of ``(B, 1, h/8, w/8)`` logits, bilinearly resized to ``(B, h, w)``."""
    return bilinear_resize(logistic(logits), h, w).data[:, 0]
