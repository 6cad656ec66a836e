"""Three-stage training driver.

Stage 1 pre-trains the backbone through a temporary decode head. Stage 2
drops the head, freezes the backbone and trains the patch generator and
recurrent module on the exponentially weighted per-step loss. Stage 3
unfreezes everything for end-to-end fine-tuning.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..autodiff import Adam, Tensor, make_rng, no_grad
from ..data import Sample, batch_iter, split_validation
from ..losses import LossConfig, recurrent_loss, stage1_loss
from ..metrics import mae
from ..model import META_KEYS, SalientModel, upsample_probs
from .config import TrainConfig

log = logging.getLogger(__name__)


class NumericError(RuntimeError):
    """Training produced a non-finite loss."""


class IncompatibleCheckpoint(ValueError):
    pass


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    val_mae: float
    lrs: dict[str, float]
    wall_time: float


@dataclass
class RunLog:
    stage: int
    rows: list[EpochRow] = field(default_factory=list)
    start_val_mae: float | None = None  # validation MAE of the incoming checkpoint, when scored

    def to_text(self, include_time: bool = True) -> str:
        groups = list(self.rows[0].lrs) if self.rows else []
        cols = ["epoch", "train_loss", "val_mae"] + [f"lr_{g}" for g in groups]
        if include_time:
            cols.append("wall_time")
        lines = ["\t".join(cols)]
        for r in self.rows:
            vals = [str(r.epoch), repr(r.train_loss), repr(r.val_mae)] + [repr(r.lrs[g]) for g in groups]
            if include_time:
                vals.append(f"{r.wall_time:.3f}")
            lines.append("\t".join(vals))
        return "\n".join(lines) + "\n"


class PlateauDecay:
    """Scale learning rates when validation MAE stalls for ``patience`` epochs."""

    def __init__(self, optimizer: Adam, patience: int, min_delta: float, factor: float):
        self.opt = optimizer
        self.patience = patience
        self.min_delta = min_delta
        self.factor = factor
        self.best = math.inf
        self.bad = 0

    def update(self, val_mae: float) -> bool:
        """Return True when this epoch set a new best."""
        if val_mae < self.best - self.min_delta:
            self.best = val_mae
            self.bad = 0
            return True
        self.bad += 1
        if self.bad >= self.patience:
            self.opt.scale_lr(self.factor)
            self.bad = 0
        return False


@dataclass
class StageResult:
    state: dict[str, np.ndarray]
    log: RunLog
    model: SalientModel


def _check_finite(loss: Tensor) -> float:
    v = loss.item()
    if not math.isfinite(v):
        raise NumericError(f"non-finite loss {v}")
    return v


def _as_batch(samples: Sequence[Sample]):
    images = np.stack([s.image.transpose(2, 0, 1) for s in samples])
    masks = np.stack([s.mask for s in samples])
    return images, masks


def validate_stage1(model: SalientModel, samples: Sequence[Sample], chunk: int = 10) -> float:
    errs = []
    with no_grad():
        for i in range(0, len(samples), chunk):
            images, masks = _as_batch(samples[i:i + chunk])
            probs = upsample_probs(model.stage1_logits(Tensor(images)), *images.shape[2:])
            errs.extend(mae(p, m) for p, m in zip(probs, masks))
    return float(np.mean(errs))


def predict_steps(model: SalientModel, image: np.ndarray) -> list[np.ndarray]:
    """Upsampled probability maps for every recurrent step of one ``(H, W, 3)`` image."""
    x = Tensor(image.transpose(2, 0, 1)[None])
    h, w = image.shape[:2]
    with no_grad():
        out = model.forward_one(x)
    return [upsample_probs(p, h, w)[0] for p in out.preds]


def validate_recurrent(model: SalientModel, samples: Sequence[Sample]) -> float:
    return float(np.mean([mae(predict_steps(model, s.image)[-1], s.mask) for s in samples]))


def _split(dataset: Sequence[Sample], cfg: TrainConfig, stage: int):
    if len(dataset) == 0:
        raise ValueError("training dataset is empty")
    if cfg.val_fraction == 0 or len(dataset) < 2:
        return list(dataset), list(dataset)
    return split_validation(dataset, cfg.val_fraction, make_rng(cfg.seed, 100))


def _run_epochs(model: SalientModel, opt: Adam, train: Sequence[Sample], val: Sequence[Sample],
                cfg: TrainConfig, stage: int, epochs: int, batch_size: int,
                step_loss: Callable, validate: Callable, after_step: Callable | None = None,
                progress: Callable[[str], None] | None = None, keep_start: bool = False) -> StageResult:
    runlog = RunLog(stage)
    decay = PlateauDecay(opt, cfg.decay_patience, cfg.decay_min_delta, cfg.decay_factor)
    order_rng = make_rng(cfg.seed, 200 + stage)
    best_state = model.state()
    if keep_start:
        # the incoming checkpoint competes in model selection
        runlog.start_val_mae = decay.best = validate(model, val)
        if progress:
            progress(f"stage {stage} start: val_mae {decay.best:.4f}")
    for epoch in range(1, epochs + 1):
        t0 = time.perf_counter()
        losses = []
        for batch in batch_iter(train, batch_size, order_rng, shuffle=True):
            opt.zero_grad()
            loss = step_loss(batch)
            losses.append(_check_finite(loss))
            loss.backward()
            opt.step()
            if after_step is not None:
                after_step()
        lrs = dict(opt.lrs)
        val_mae = validate(model, val)
        if decay.update(val_mae):
            best_state = model.state()
        row = EpochRow(epoch, float(np.mean(losses)), val_mae, lrs, time.perf_counter() - t0)
        runlog.rows.append(row)
        msg = f"stage {stage} epoch {epoch}: loss {row.train_loss:.4f} val_mae {val_mae:.4f} ({row.wall_time:.1f}s)"
        log.info(msg)
        if progress:
            progress(msg)
    opt.zero_grad()
    return StageResult(best_state, runlog, model)


def _loss_cfg(cfg: TrainConfig) -> LossConfig:
    return LossConfig(cfg.lambda_ce, cfg.lambda_iou, cfg.k, cfg.iou_smooth)


def train_stage1(dataset: Sequence[Sample], cfg: TrainConfig, progress=None) -> StageResult:
    train, val = _split(dataset, cfg, 1)
    model = SalientModel.from_config(cfg, with_head=True, with_recurrent=False)
    groups = model.groups()
    opt = Adam(groups, {g: cfg.stage1_lr for g in groups})
    lcfg = _loss_cfg(cfg)

    def step_loss(batch):
        return stage1_loss(model.stage1_logits(Tensor(batch.images)), batch.targets, lcfg)

    return _run_epochs(model, opt, train, val, cfg, 1, cfg.stage1_epochs, cfg.stage1_batch, step_loss,
                       validate_stage1, progress=progress)


def _check_arch(state: dict[str, np.ndarray], cfg: TrainConfig, keys: Sequence[str]) -> None:
    for k in keys:
        rec = state.get(f"meta.{k}")
        if rec is None:
            raise IncompatibleCheckpoint(f"checkpoint lacks meta.{k}")
        if float(rec.reshape(-1)[0]) != float(getattr(cfg, k)):
            raise IncompatibleCheckpoint(f"checkpoint {k}={rec.reshape(-1)[0]} but config has {getattr(cfg, k)}")


_SPM_KEYS = ("base_channels", "feature_channels", "branch_channels", "dilation4", "dilation5")


def _recurrent_step_loss(model: SalientModel, cfg: TrainConfig):
    def step_loss(batch):
        total = None
        for i in range(len(batch)):
            out = model.forward_one(Tensor(batch.images[i:i + 1]))
            loss = recurrent_loss(out.preds, batch.targets[i:i + 1], cfg.k)
            total = loss if total is None else total + loss
        return total * (1.0 / len(batch))

    return step_loss


def train_stage2(dataset: Sequence[Sample], cfg: TrainConfig, spm_state: dict[str, np.ndarray],
                 progress=None) -> StageResult:
    _check_arch(spm_state, cfg, _SPM_KEYS)
    train, val = _split(dataset, cfg, 2)
    model = SalientModel.from_config(cfg, with_head=False, with_recurrent=True)
    try:
        model.load(spm_state, ("spm",))
    except (KeyError, ValueError) as exc:
        raise IncompatibleCheckpoint(str(exc)) from None
    model.backbone.requires_grad_(False)
    groups = model.groups()
    del groups["spm"]
    opt = Adam(groups, {"pgm": cfg.stage2_lr_pgm, "ram": cfg.stage2_lr_ram})
    spm_params = model.backbone.parameters()

    def assert_frozen():
        if any(p.grad is not None for p in spm_params):
            raise RuntimeError("frozen backbone received a gradient")

    return _run_epochs(model, opt, train, val, cfg, 2, cfg.stage2_epochs, cfg.stage2_batch,
                       _recurrent_step_loss(model, cfg), validate_recurrent, after_step=assert_frozen,
                       progress=progress)


def train_stage3(dataset: Sequence[Sample], cfg: TrainConfig, state: dict[str, np.ndarray],
                 progress=None) -> StageResult:
    _check_arch(state, cfg, META_KEYS)
    if not any(k.startswith("ram.") for k in state):
        raise IncompatibleCheckpoint("stage 3 needs a checkpoint with patch generator and recurrent module")
    train, val = _split(dataset, cfg, 3)
    model = SalientModel.from_config(cfg, with_head=False, with_recurrent=True)
    try:
        model.load(state, ("spm", "pgm", "ram"))
    except (KeyError, ValueError) as exc:
        raise IncompatibleCheckpoint(str(exc)) from None
    opt = Adam(model.groups(), {"spm": cfg.spm_lr_stage3, "pgm": cfg.stage2_lr_pgm, "ram": cfg.stage2_lr_ram})
    return _run_epochs(model, opt, train, val, cfg, 3, cfg.stage3_epochs, cfg.stage2_batch,
                       _recurrent_step_loss(model, cfg), validate_recurrent, progress=progress,
                       keep_start=True)
