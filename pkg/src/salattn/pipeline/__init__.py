from .config import ConfigError, TrainConfig, load_config, parse_config
from .inference import EvalReport, StepwiseTable, evaluate_dirs, infer, step_maps, stepwise_report
from .train import (IncompatibleCheckpoint, NumericError, PlateauDecay, RunLog, StageResult, train_stage1,
                    train_stage2, train_stage3)

__all__ = [
    "ConfigError", "TrainConfig", "load_config", "parse_config",
    "EvalReport", "StepwiseTable", "evaluate_dirs", "infer", "step_maps", "stepwise_report",
    "IncompatibleCheckpoint", "NumericError", "PlateauDecay", "RunLog", "StageResult", "train_stage1",
    "train_stage2", "train_stage3",
]
