"""End-to-end desk run: synthesize data, train all three stages, evaluate."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

from ..data import SynthConfig, synth_generate, write_checkpoint, write_dataset, write_pgm
from ..metrics import evaluate_map
from ..model import SalientModel
from .config import TrainConfig
from .inference import EvalReport, ImageScore, StepwiseTable, evaluate_dirs, infer, stepwise_report
from .train import RunLog, train_stage1, train_stage2, train_stage3

# test data uses a seed stream disjoint from any training seed
TEST_SEED_OFFSET = 10_000


def _score(pred, gt) -> tuple[float, float]:
    rep = evaluate_map(pred, gt)
    return rep.mae, rep.max_fbeta


@dataclass
class DeskResult:
    logs: list[RunLog]
    states: list[dict] = field(repr=False)
    stage2_spm_in: dict = field(repr=False)
    report: EvalReport = field(repr=False)
    stepwise: StepwiseTable = field(repr=False)
    seconds: float = 0.0


def run_desk(cfg: TrainConfig, out_dir=None, progress=None) -> DeskResult:
    """Train stages 1 to 3 on ``cfg.train_count`` synthetic samples and score the held-out set.

    When ``out_dir`` is given, datasets, checkpoints, logs, predictions and
    reports are written beneath it.
    """
    t0 = time.perf_counter()
    train = synth_generate(SynthConfig(seed=cfg.seed, count=cfg.train_count, size=cfg.image_size))
    test = synth_generate(SynthConfig(seed=cfg.seed + TEST_SEED_OFFSET, count=cfg.test_count,
                                      size=cfg.image_size))
    r1 = train_stage1(train, cfg, progress)
    spm_in = {k: v.copy() for k, v in r1.state.items() if k.startswith("spm.")}
    r2 = train_stage2(train, cfg, r1.state, progress)
    r3 = train_stage3(train, cfg, r2.state, progress)
    model = SalientModel.from_state(r3.state, with_head=False, with_recurrent=True)

    preds = {s.ident: infer(model, s.image) for s in test}
    if out_dir is None:
        report = EvalReport([ImageScore(s.ident, *_score(preds[s.ident], s.mask))
                             for s in sorted(test, key=lambda s: s.ident)])
    else:
        root = Path(out_dir)
        write_dataset(train, root / "train")
        write_dataset(test, root / "test")
        for i, r in enumerate((r1, r2, r3), 1):
            write_checkpoint(root / f"stage{i}.ckpt", r.state)
            (root / f"stage{i}.log").write_text(r.log.to_text())
        (root / "pred").mkdir(parents=True, exist_ok=True)
        for ident, m in preds.items():
            (root / "pred" / f"{ident}.pgm").write_bytes(write_pgm(m))
        # scored through the quantized maps on disk, as the eval command would
        report = evaluate_dirs(root / "pred", root / "test")
        (root / "report.txt").write_text(report.to_text())
    table = stepwise_report(model, test)
    if out_dir is not None:
        (Path(out_dir) / "stepwise.txt").write_text(table.to_text())
    return DeskResult([r1.log, r2.log, r3.log], [r1.state, r2.state, r3.state], spm_in, report, table,
                      time.perf_counter() - t0)
