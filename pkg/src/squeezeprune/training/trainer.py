"""Mini-batch SGDM training with a plateau-driven learning-rate ladder."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from ..autodiff import SGDM, NumericError, Tape, softmax_cross_entropy
from ..data.dataset import ImageSet
from ..data.preprocess import augment_train, eval_preprocess, to_tensor
from ..model.graph import ModelGraph
from .config import TrainConfig

log = logging.getLogger(__name__)

HISTORY_FIELDS = ["epoch", "lr", "train_loss", "val_loss", "val_acc", "wall_seconds"]


class PlateauSchedule:
    """Walks down ``[initial_lr, *ladder]`` when validation loss stalls.

    An epoch counts as an improvement iff ``loss < best * (1 - min_delta)``,
    where ``best`` is the lowest loss seen so far.  After ``patience``
    consecutive non-improving epochs the rate steps down; once the ladder is
    exhausted the next plateau finishes training.
    """

    def __init__(self, initial_lr: float, ladder, patience: int, min_delta: float):
        self.rates = [initial_lr, *ladder]
        self.stage = 0
        self.patience = patience
        self.min_delta = min_delta
        self.best = np.inf
        self.bad_epochs = 0
        self.finished = False

    @property
    def lr(self) -> float:
        return self.rates[self.stage]

    def step(self, val_loss: float) -> str | None:
        """Feed one validation loss; returns ``"drop"``, ``"stop"`` or ``None``."""
        improved = val_loss < self.best * (1.0 - self.min_delta)
        self.best = min(self.best, val_loss)
        if improved:
            self.bad_epochs = 0
            return None
        self.bad_epochs += 1
        if self.bad_epochs < self.patience:
            return None
        self.bad_epochs = 0
        if self.stage + 1 < len(self.rates):
            self.stage += 1
            return "drop"
        self.finished = True
        return "stop"


@dataclass
class TrainHistory:
    rows: list[dict] = field(default_factory=list)
    lr_changes: list[tuple[int, float, float]] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.DictWriter(fh, HISTORY_FIELDS, lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: row[k] for k in HISTORY_FIELDS})


def iterate_batches(dataset: ImageSet, batch_size: int, rng: np.random.Generator,
                    augment: bool = True) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Shuffled mini-batches of normalized NCHW tensors."""
    order = rng.permutation(len(dataset))
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        if augment:
            x = np.stack([to_tensor(augment_train(dataset.images[i], rng)) for i in idx])
        else:
            x = np.stack([eval_preprocess(dataset.images[i]) for i in idx])
        yield x, dataset.labels[idx]


def eval_tensors(dataset: ImageSet) -> np.ndarray:
    return np.stack([eval_preprocess(img) for img in dataset.images])


def evaluate(model: ModelGraph, x: np.ndarray, y: np.ndarray, batch_size: int = 64) -> tuple[float, float]:
    """Mean cross-entropy and accuracy in eval mode (BN running statistics)."""
    total_loss, correct = 0.0, 0
    for start in range(0, len(x), batch_size):
        xb, yb = x[start:start + batch_size], y[start:start + batch_size]
        logits = model.forward(xb, train=False)
        total_loss += float(softmax_cross_entropy(logits, yb).data) * len(xb)
        correct += int((logits.data.argmax(axis=1) == yb).sum())
    return total_loss / len(x), correct / len(x)


def train_step(model: ModelGraph, opt: SGDM, x: np.ndarray, y: np.ndarray):
    """One SGDM step; returns ``(loss, {param: grad})`` with grads taken before the update."""
    opt.zero_grad()
    with Tape() as tape:
        loss = softmax_cross_entropy(model.forward(x, train=True), y)
    grads = tape.backward(loss)
    opt.step()
    return float(loss.data), grads


def train(model: ModelGraph, train_set: ImageSet, val_set: ImageSet, config: TrainConfig,
          rng: np.random.Generator | None = None) -> TrainHistory:
    """Train ``model`` in place; returns per-epoch history."""
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("train and validation sets must be non-empty")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    x_val, y_val = eval_tensors(val_set), val_set.labels
    schedule = PlateauSchedule(config.initial_lr, config.lr_ladder, config.plateau_patience,
                               config.plateau_min_delta)
    opt = SGDM(model.param_tensors(), schedule.lr, config.momentum, config.weight_decay)
    history = TrainHistory()
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        opt.lr = schedule.lr
        losses = []
        for it, (x, y) in enumerate(iterate_batches(train_set, config.batch_size, rng), start=1):
            try:
                loss, _ = train_step(model, opt, x, y)
            except NumericError as exc:
                raise NumericError(f"non-finite values at epoch {epoch} iteration {it} (lr={opt.lr}): {exc}") from exc
            losses.append(loss)
        val_loss, val_acc = evaluate(model, x_val, y_val)
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch} (lr={opt.lr})")
        history.rows.append({"epoch": epoch, "lr": opt.lr, "train_loss": float(np.mean(losses)),
                             "val_loss": val_loss, "val_acc": val_acc,
                             "wall_seconds": round(time.perf_counter() - t0, 3)})
        log.info("epoch %d lr %g train %.4f val %.4f acc %.3f", epoch, opt.lr, np.mean(losses), val_loss, val_acc)
        old = schedule.lr
        action = schedule.step(val_loss)
        if action == "drop":
            history.lr_changes.append((epoch, old, schedule.lr))
            log.info("epoch %d: validation loss plateau, lr %g -> %g", epoch, old, schedule.lr)
        elif action == "stop":
            log.info("epoch %d: plateau after final learning rate, stopping", epoch)
            break
    return history
