from .config import TrainConfig
from .split import split_train_val, validation_count
from .trainer import (
    HISTORY_FIELDS,
    PlateauSchedule,
    TrainHistory,
    eval_tensors,
    evaluate,
    iterate_batches,
    train,
    train_step,
)

__all__ = [
    "HISTORY_FIELDS", "PlateauSchedule", "TrainConfig", "TrainHistory", "eval_tensors", "evaluate",
    "iterate_batches", "split_train_val", "train", "train_step", "validation_count",
]
