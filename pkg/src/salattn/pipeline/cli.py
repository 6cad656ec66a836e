"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numeric
failure (non-finite loss or a failed gradient check).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..data import (CheckpointError, NetpbmError, SynthConfig, load_dataset, read_checkpoint, synth_generate,
                    write_checkpoint, write_dataset, write_pgm)
from ..data.netpbm import load_image
from ..model import SalientModel
from .config import ConfigError, TrainConfig, load_config
from .inference import evaluate_dirs, infer, stepwise_report
from .train import IncompatibleCheckpoint, NumericError, train_stage1, train_stage2, train_stage3

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _echo(msg: str) -> None:
    print(msg, flush=True)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for data errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_recurrent_model(path) -> SalientModel:
    state = read_checkpoint(path)
    if not any(k.startswith("ram.") for k in state):
        raise IncompatibleCheckpoint(f"{path} has no recurrent module (is it a stage-1 checkpoint?)")
    try:
        return SalientModel.from_state(state, with_head=False, with_recurrent=True)
    except (KeyError, ValueError) as exc:
        raise IncompatibleCheckpoint(str(exc)) from None


def cmd_synth(args) -> int:
    samples = synth_generate(SynthConfig(seed=args.seed, count=args.count, size=args.size))
    write_dataset(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    data = load_dataset(args.data)
    if args.stage == 1:
        if args.ckpt_in:
            raise UsageError("stage 1 trains from scratch; --ckpt-in is not accepted")
        result = train_stage1(data, cfg, progress=_echo)
    else:
        if not args.ckpt_in:
            raise UsageError(f"stage {args.stage} needs --ckpt-in")
        state = read_checkpoint(args.ckpt_in)
        fn = train_stage2 if args.stage == 2 else train_stage3
        result = fn(data, cfg, state, progress=_echo)
    write_checkpoint(args.ckpt_out, result.state)
    if args.log:
        Path(args.log).write_text(result.log.to_text())
    return EXIT_OK


def cmd_infer(args) -> int:
    model = _load_recurrent_model(args.ckpt)
    Path(args.out).write_bytes(write_pgm(infer(model, load_image(args.input))))
    return EXIT_OK


def cmd_eval(args) -> int:
    report = evaluate_dirs(args.pred, args.gt)
    text = report.to_text()
    if args.out:
        Path(args.out).write_text(text)
    print(f"mean MAE {report.mean_mae:.6f}  mean max-F_beta {report.mean_fbeta:.6f}  ({len(report.rows)} images)")
    return EXIT_OK


def cmd_stepwise(args) -> int:
    model = _load_recurrent_model(args.ckpt)
    table = stepwise_report(model, load_dataset(args.data))
    text = table.to_text()
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from ..verify import CASES, TOL, run_gradchecks
    if args.op and args.op not in CASES:
        raise UsageError(f"unknown op {args.op!r}; choose from {', '.join(CASES)}")
    outcomes = run_gradchecks([args.op] if args.op else None, instances=args.instances)
    worst: dict[str, float] = {}
    for o in outcomes:
        worst[o.op] = max(worst.get(o.op, 0.0), o.max_rel_error)
    for op, err in worst.items():
        print(f"{'PASS' if err < TOL else 'FAIL'}  {op:22s} max rel error {err:.3e}")
    return EXIT_OK if all(o.passed for o in outcomes) else EXIT_NUMERIC


def cmd_desk(args) -> int:
    from .run import run_desk
    cfg = load_config(args.config) if args.config else TrainConfig()
    res = run_desk(cfg, args.out, progress=_echo)
    print(res.stepwise.to_text(), end="")
    print(f"held-out mean MAE {res.report.mean_mae:.4f}  max-F_beta {res.report.mean_fbeta:.4f}  "
          f"({res.seconds / 60:.1f} min)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="salattn", description="Recurrent-attention salient object segmentation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=200)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("train", help="run one training stage")
    s.add_argument("--stage", type=int, choices=(1, 2, 3), required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--ckpt-in")
    s.add_argument("--ckpt-out", required=True)
    s.add_argument("--log")
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("infer", help="predict a saliency map for one image")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_infer)

    s = sub.add_parser("eval", help="score a prediction directory")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("stepwise", help="per-step MAE and max-F_beta table")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_stepwise)

    s = sub.add_parser("gradcheck", help="central-difference gradient checks")
    s.add_argument("--op")
    s.add_argument("--instances", type=int, default=3)
    s.set_defaults(fn=cmd_gradcheck)

    s = sub.add_parser("desk", help="synthesize, train stages 1-3 and evaluate in one go")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_desk)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"salattn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"salattn: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, NetpbmError, CheckpointError, IncompatibleCheckpoint, FileNotFoundError,
            ValueError, OSError) as exc:
        print(f"salattn: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
