"""Inference, directory evaluation and the per-step ablation table."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..autodiff import Tensor, no_grad
from ..data import NetpbmError, Sample, read_pgm
from ..metrics import evaluate_map
from ..model import SalientModel, upsample_probs

STRIDE = 8


def _validate_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {image.shape}")
    if min(image.shape[:2]) < STRIDE:
        raise ValueError(f"image extents {image.shape[:2]} smaller than {STRIDE}")
    if not np.all(np.isfinite(image)):
        raise ValueError("image contains non-finite values")
    return image


def _pad(image: np.ndarray) -> np.ndarray:
    h, w = image.shape[:2]
    ph, pw = -h % STRIDE, -w % STRIDE
    if ph or pw:
        image = np.pad(image, ((0, ph), (0, pw), (0, 0)), mode="edge")
    return image


def step_maps(model: SalientModel, image: np.ndarray) -> list[np.ndarray]:
    """Probability maps ``Pred_0 .. Pred_N`` at the input resolution.

    Extents that are not multiples of 8 are edge-padded before the forward
    pass and cropped afterwards.
    """
    image = _validate_image(image)
    h, w = image.shape[:2]
    padded = _pad(image)
    x = Tensor(padded.transpose(2, 0, 1)[None])
    with no_grad():
        preds = model.forward_one(x).preds
    return [upsample_probs(p, *padded.shape[:2])[0, :h, :w] for p in preds]


def infer(model: SalientModel, image: np.ndarray) -> np.ndarray:
    return step_maps(model, image)[-1]


@dataclass
class ImageScore:
    ident: str
    mae: float
    max_fbeta: float


@dataclass
class EvalReport:
    rows: list[ImageScore]

    @property
    def mean_mae(self) -> float:
        return float(np.mean([r.mae for r in self.rows]))

    @property
    def mean_fbeta(self) -> float:
        return float(np.mean([r.max_fbeta for r in self.rows]))

    def to_text(self) -> str:
        lines = ["id\tmae\tmax_fbeta"]
        lines += [f"{r.ident}\t{r.mae!r}\t{r.max_fbeta!r}" for r in self.rows]
        lines.append(f"mean\t{self.mean_mae!r}\t{self.mean_fbeta!r}")
        return "\n".join(lines) + "\n"


def _pgm_dir(root: Path) -> Path:
    # a dataset root holds its masks in masks/
    return root / "masks" if (root / "masks").is_dir() else root


def evaluate_dirs(pred_dir, gt_dir) -> EvalReport:
    """Score ``<id>.pgm`` predictions against ``<id>.pgm`` ground truth masks."""
    pred_dir, gt_dir = _pgm_dir(Path(pred_dir)), _pgm_dir(Path(gt_dir))
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise FileNotFoundError(f"{d} is not a directory")
    pred_ids = {p.stem for p in pred_dir.glob("*.pgm")}
    gt_ids = {p.stem for p in gt_dir.glob("*.pgm")}
    if pred_ids != gt_ids:
        diff = sorted(pred_ids ^ gt_ids)
        raise NetpbmError(f"prediction and ground-truth identifiers differ: {diff[:5]}")
    if not gt_ids:
        raise NetpbmError(f"no .pgm files in {gt_dir}")
    rows = []
    for ident in sorted(gt_ids):
        pred = read_pgm((pred_dir / f"{ident}.pgm").read_bytes())
        gt = (read_pgm((gt_dir / f"{ident}.pgm").read_bytes()) >= 0.5).astype(np.float64)
        if pred.shape != gt.shape:
            raise NetpbmError(f"{ident}: prediction {pred.shape} vs ground truth {gt.shape}")
        rep = evaluate_map(pred, gt)
        rows.append(ImageScore(ident, rep.mae, rep.max_fbeta))
    return EvalReport(rows)


@dataclass
class StepwiseTable:
    mae: list[float]
    max_fbeta: list[float]

    def to_text(self) -> str:
        lines = ["step\tmae\tmax_fbeta"]
        lines += [f"{k}\t{m!r}\t{f!r}" for k, (m, f) in enumerate(zip(self.mae, self.max_fbeta))]
        return "\n".join(lines) + "\n"


def stepwise_report(model: SalientModel, dataset: Sequence[Sample]) -> StepwiseTable:
    """Dataset-mean MAE and max F-beta of every ``Pred_k``."""
    if not dataset:
        raise ValueError("stepwise report needs a nonempty dataset")
    per_step: list[list] = []
    for s in dataset:
        for k, m in enumerate(step_maps(model, s.image)):
            if k == len(per_step):
                per_step.append([])
            per_step[k].append(evaluate_map(m, s.mask))
    return StepwiseTable([float(np.mean([r.mae for r in reps])) for reps in per_step],
                         [float(np.mean([r.max_fbeta for r in reps])) for reps in per_step])
