from .checkpoint import (
    BadMagicError,
    CheckpointError,
    CorruptHeaderError,
    ShapeTableError,
    TruncatedPayloadError,
    VersionError,
    load_checkpoint,
    save_checkpoint,
)
from .graph import ChannelError, ModelGraph
from .layers import BatchNorm2d, Conv2d, Fire, FireSpec, GlobalAvgPool, Linear, MaxPool2d, ReLU
from .stats import ModelStats, count_stats, learnables_excluding_classifier
from .zoo import build_config, build_from_schedule, build_full_config, build_micro_config, micro_schedule

__all__ = [
    "BadMagicError", "BatchNorm2d", "ChannelError", "CheckpointError", "Conv2d", "CorruptHeaderError", "Fire",
    "FireSpec", "GlobalAvgPool", "Linear", "MaxPool2d", "ModelGraph", "ModelStats", "ReLU", "ShapeTableError",
    "TruncatedPayloadError", "VersionError", "build_config", "build_from_schedule", "build_full_config",
    "build_micro_config", "count_stats", "learnables_excluding_classifier", "load_checkpoint", "micro_schedule",
    "save_checkpoint",
]
