from .checkpoint import CheckpointError, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint
from .dataset import (Batch, Sample, area_downsample, batch_iter, load_dataset, split_validation,
                      write_dataset)
from .netpbm import NetpbmError, UnsupportedMaxval, read_pgm, read_ppm, write_pgm, write_ppm
from .synth import SynthConfig, generate_sample, synth_generate

__all__ = [
    "CheckpointError", "load_checkpoint", "read_checkpoint", "save_checkpoint", "write_checkpoint",
    "Batch", "Sample", "area_downsample", "batch_iter", "load_dataset", "split_validation", "write_dataset",
    "NetpbmError", "UnsupportedMaxval", "read_pgm", "read_ppm", "write_pgm", "write_ppm",
    "SynthConfig", "generate_sample", "synth_generate",
]
