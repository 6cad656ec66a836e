"""Procedural salient-object scenes with exact masks.

Each scene has a smooth textured background, optional clutter streaks,
low-contrast distractor shapes that stay out of the mask, optional soft
shadows, and one to three high-contrast salient shapes (ellipses or convex
polygons). A scene is a pure function of ``(SynthConfig, index)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import make_rng
from ..autodiff.functional import interp_matrix
from .dataset import Sample

_MAX_TRIES = 200


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    count: int = 200
    size: int = 64
    clutter_density: float = 0.5
    distractors: tuple[int, int] = (1, 3)
    shadow_prob: float = 0.3
    contrast: tuple[float, float] = (0.35, 0.75)
    fg_range: tuple[float, float] = (0.05, 0.6)

    def __post_init__(self):
        if self.size < 32:
            raise ValueError(f"synthetic image size must be >= 32, got {self.size}")
        if self.count < 0:
            raise ValueError("count must be non-negative")
        lo, hi = self.distractors
        if lo < 0 or hi < lo:
            raise ValueError("invalid distractor count range")


def _smooth_noise(rng, size: int, cells: int) -> np.ndarray:
    coarse = rng.uniform(-1.0, 1.0, size=(cells, cells))
    m = interp_matrix(cells, size)
    return m @ coarse @ m.T


def _ellipse(rng, yy, xx, size, r_lo, r_hi):
    cy, cx = rng.uniform(0.2, 0.8, size=2) * size
    ry, rx = rng.uniform(r_lo, r_hi, size=2) * size
    th = rng.uniform(0, np.pi)
    dy, dx = yy - cy, xx - cx
    a = dx * np.cos(th) + dy * np.sin(th)
    b = -dx * np.sin(th) + dy * np.cos(th)
    return (a / rx) ** 2 + (b / ry) ** 2 <= 1.0


def _polygon(rng, yy, xx, size, r_lo, r_hi):
    cy, cx = rng.uniform(0.2, 0.8, size=2) * size
    k = int(rng.integers(3, 7))
    angles = np.sort(rng.uniform(0, 2 * np.pi, size=k))
    radii = rng.uniform(r_lo, r_hi, size=k) * size
    px, py = cx + radii * np.cos(angles), cy + radii * np.sin(angles)
    inside = np.ones_like(yy, dtype=bool)
    # points sorted by angle around the centre; keep the convex hull side test
    for i in range(k):
        x0, y0, x1, y1 = px[i], py[i], px[(i + 1) % k], py[(i + 1) % k]
        cross = (x1 - x0) * (yy - y0) - (y1 - y0) * (xx - x0)
        inside &= cross >= 0
    return inside


def _shape(rng, yy, xx, size, r_lo, r_hi):
    fn = _ellipse if rng.uniform() < 0.5 else _polygon
    return fn(rng, yy, xx, size, r_lo, r_hi)


def _colour(rng, base: np.ndarray, contrast: float) -> np.ndarray:
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    lum = 1.0 if base.mean() < 0.5 else -1.0
    # mix a luminance shift with a hue shift; contrast is the Euclidean colour distance
    offset = 0.6 * lum * np.ones(3) / np.sqrt(3) + 0.8 * direction
    offset *= contrast / np.linalg.norm(offset)
    return np.clip(base + offset, 0.0, 1.0)


def generate_sample(cfg: SynthConfig, index: int) -> tuple[Sample, np.ndarray]:
    """Return the sample and the boolean distractor-only region."""
    rng = make_rng(cfg.seed, index)
    n = cfg.size
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64) + 0.5

    for _ in range(_MAX_TRIES):
        n_obj = int(rng.integers(1, 4))
        shapes = [_shape(rng, yy, xx, n, 0.10, 0.32) for _ in range(n_obj)]
        mask = np.logical_or.reduce(shapes)
        frac = mask.mean()
        if cfg.fg_range[0] <= frac <= cfg.fg_range[1]:
            break
    else:  # pragma: no cover - the acceptance window is wide
        raise RuntimeError(f"could not place salient objects for sample {index}")

    base = rng.uniform(0.25, 0.65) + rng.uniform(-0.08, 0.08, size=3)
    img = np.broadcast_to(base, (n, n, 3)).copy()
    tex = _smooth_noise(rng, n, 6) * 0.08 + _smooth_noise(rng, n, 17) * 0.05 * (0.5 + cfg.clutter_density)
    img += tex[..., None]
    if cfg.clutter_density > 0:
        n_streaks = rng.poisson(6 * cfg.clutter_density)
        for _ in range(n_streaks):
            th = rng.uniform(0, np.pi)
            off = rng.uniform(0, n)
            width = rng.uniform(0.5, 1.5)
            d = np.abs(np.cos(th) * xx + np.sin(th) * yy - off)
            img += ((d < width) * rng.uniform(-0.12, 0.12))[..., None]

    if rng.uniform() < cfg.shadow_prob:
        cy, cx = rng.uniform(0.2, 0.8, size=2) * n
        r = rng.uniform(0.15, 0.3) * n
        blob = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r)))
        img *= (1.0 - 0.35 * blob * ~mask)[..., None]

    distract = np.zeros((n, n), dtype=bool)
    lo, hi = cfg.distractors
    for _ in range(int(rng.integers(lo, hi + 1))):
        region = _shape(rng, yy, xx, n, 0.06, 0.18) & ~mask
        col = _colour(rng, base, rng.uniform(0.05, 0.12))
        img[region] = col + tex[region][:, None]
        distract |= region

    c_lo, c_hi = cfg.contrast
    for shp in shapes:
        col = _colour(rng, base, rng.uniform(c_lo, c_hi))
        img[shp] = col + 0.3 * tex[shp][:, None]

    img = np.clip(img + rng.normal(scale=0.01, size=img.shape), 0.0, 1.0)
    sample = Sample(img, mask.astype(np.float64), f"s{cfg.seed:04d}_{index:05d}")
    return sample, distract & ~mask


def synth_generate(cfg: SynthConfig) -> list[Sample]:
    return [generate_sample(cfg, i)[0] for i in range(cfg.count)]
