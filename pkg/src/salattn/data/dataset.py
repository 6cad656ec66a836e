"""Samples, dataset directories and seeded mini-batching."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .netpbm import NetpbmError, read_pgm, read_ppm, write_pgm, write_ppm

OUTPUT_STRIDE = 8


@dataclass
class Sample:
    image: np.ndarray  # (H, W, 3) in [0, 1]
    mask: np.ndarray  # (H, W) in {0, 1}
    ident: str

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ValueError(f"sample {self.ident}: image must be (H, W, 3), got {self.image.shape}")
        if self.mask.shape != self.image.shape[:2]:
            raise ValueError(f"sample {self.ident}: mask {self.mask.shape} vs image {self.image.shape[:2]}")
        if not np.all((self.mask == 0) | (self.mask == 1)):
            raise ValueError(f"sample {self.ident}: mask is not binary")


def area_downsample(mask: np.ndarray, factor: int = OUTPUT_STRIDE) -> np.ndarray:
    """Average non-overlapping ``factor x factor`` blocks of the two trailing axes."""
    h, w = mask.shape[-2:]
    if h % factor or w % factor:
        raise ValueError(f"extents {h}x{w} not divisible by {factor}")
    lead = mask.shape[:-2]
    return mask.reshape(lead + (h // factor, factor, w // factor, factor)).mean(axis=(-3, -1))


class Batch:
    """Stacked NCHW images and masks; the 1/8-resolution targets are built on first use."""

    def __init__(self, samples: Sequence[Sample]):
        self.samples = list(samples)
        self.ids = [s.ident for s in self.samples]
        self.images = np.stack([s.image.transpose(2, 0, 1) for s in self.samples])
        self.masks = np.stack([s.mask[None] for s in self.samples])

    def __len__(self) -> int:
        return len(self.samples)

    @cached_property
    def targets(self) -> np.ndarray:
        return area_downsample(self.masks)


def batch_iter(dataset: Sequence[Sample], batch_size: int, rng: np.random.Generator | None = None,
               shuffle: bool = True) -> Iterator[Batch]:
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    if len(dataset) == 0:
        raise ValueError("cannot iterate an empty dataset")
    order = np.arange(len(dataset))
    if shuffle:
        if rng is None:
            raise ValueError("shuffling needs an rng")
        order = rng.permutation(len(dataset))
    for start in range(0, len(order), batch_size):
        yield Batch([dataset[i] for i in order[start:start + batch_size]])


def split_validation(dataset: Sequence[Sample], fraction: float, rng: np.random.Generator
                     ) -> tuple[list[Sample], list[Sample]]:
    """Hold out ``round(fraction * len)`` samples (at least one when fraction > 0)."""
    n = len(dataset)
    n_val = int(round(fraction * n))
    if fraction > 0:
        n_val = max(1, n_val)
    if n_val >= n:
        raise ValueError(f"validation split leaves no training data ({n} samples)")
    order = rng.permutation(n)
    val = sorted(order[:n_val].tolist())
    keep = sorted(order[n_val:].tolist())
    return [dataset[i] for i in keep], [dataset[i] for i in val]


def write_dataset(samples: Sequence[Sample], root) -> None:
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    for s in samples:
        (root / "images" / f"{s.ident}.ppm").write_bytes(write_ppm(s.image))
        (root / "masks" / f"{s.ident}.pgm").write_bytes(write_pgm(s.mask))


def load_dataset(root) -> list[Sample]:
    """Read ``images/<id>.ppm`` + ``masks/<id>.pgm`` pairs in sorted id order."""
    root = Path(root)
    img_dir, mask_dir = root / "images", root / "masks"
    if not img_dir.is_dir() or not mask_dir.is_dir():
        raise FileNotFoundError(f"{root} lacks images/ and masks/ subdirectories")
    img_ids = {p.stem for p in img_dir.glob("*.ppm")}
    mask_ids = {p.stem for p in mask_dir.glob("*.pgm")}
    if img_ids != mask_ids:
        diff = sorted(img_ids ^ mask_ids)
        raise NetpbmError(f"image/mask identifiers differ: {diff[:5]}")
    out = []
    for ident in sorted(img_ids):
        img = read_ppm((img_dir / f"{ident}.ppm").read_bytes())
        mask = (read_pgm((mask_dir / f"{ident}.pgm").read_bytes()) >= 0.5).astype(np.float64)
        out.append(Sample(img, mask, ident))
    return out
