"""Iterative score / prune / retrain loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..autodiff import SGDM, Tape, softmax_cross_entropy
from ..data.dataset import ImageSet
from ..model.checkpoint import load_checkpoint, save_checkpoint
from ..model.graph import ModelGraph
from ..model.layers import BatchNorm2d
from ..model.stats import count_stats
from ..training.config import TrainConfig
from ..training.trainer import eval_tensors, evaluate, iterate_batches, train
from .groups import FilterGroup, group_model
from .importance import ImportanceTable, normalize_per_layer, score_batch, select_victims
from .surgery import surgery

log = logging.getLogger(__name__)

LOG_FIELDS = ["iteration", "pruned_fraction", "filters", "learnables", "embedding_dim", "model_bytes",
              "minibatch_loss", "val_accuracy", "retrained"]
VICTIM_FIELDS = ["iteration", "layer", "filter_index", "score"]
LOG_NAME = "prune_log.csv"
VICTIMS_NAME = "victims.csv"


@dataclass
class PruneSchedule:
    step_fraction: float = 0.01
    subset_fraction: float = 0.25
    retrain_every: int = 5
    max_total_fraction: float = 0.4
    scoring_lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 128
    floor: int = 1
    normalize_per_layer: bool = False
    recalibrate_bn: bool = False

    def __post_init__(self):
        if not 0 < self.step_fraction < 1:
            raise ValueError(f"step_fraction must be in (0, 1), got {self.step_fraction}")
        if not 0 < self.subset_fraction <= 1:
            raise ValueError(f"subset_fraction must be in (0, 1], got {self.subset_fraction}")
        if not 0 < self.max_total_fraction < 1:
            raise ValueError(f"max_total_fraction must be in (0, 1), got {self.max_total_fraction}")
        if self.retrain_every < 0 or self.floor < 1 or self.scoring_lr < 0:
            raise ValueError("retrain_every >= 0, floor >= 1 and scoring_lr >= 0 required")

    @property
    def iterations(self) -> int:
        return int(round(self.max_total_fraction / self.step_fraction))

    def victims_per_iteration(self, original_filters: int) -> int:
        """``step_fraction`` of the original filter count, rounded half up, at least one."""
        return max(1, int(np.floor(self.step_fraction * original_filters + 0.5)))

    def retrains_at(self, iteration: int) -> bool:
        return self.retrain_every > 0 and (iteration - 1) % self.retrain_every == 0


def iteration_rng(seed: int, iteration: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, iteration, stream])


def scoring_epoch(model: ModelGraph, subset: ImageSet, schedule: PruneSchedule, rng: np.random.Generator,
                  groups: list[FilterGroup] | None = None) -> tuple[ImportanceTable, float]:
    """One SGDM pass over ``subset`` accumulating group scores; updates ``model`` in place.

    Returns the finalized table and the mean mini-batch loss.
    """
    if len(subset) == 0:
        raise ValueError("scoring subset is empty")
    groups = group_model(model) if groups is None else groups
    named = model.named_params()
    table = ImportanceTable(len(groups))
    opt = SGDM(list(named.values()), schedule.scoring_lr, schedule.momentum)
    losses = []
    for x, y in iterate_batches(subset, schedule.batch_size, rng):
        opt.zero_grad()
        with Tape() as tape:
            loss = softmax_cross_entropy(model.forward(x, train=True), y)
        tape.backward(loss)
        score_batch(table, groups, {n: t.grad for n, t in named.items()}, {n: t.data for n, t in named.items()})
        opt.step()
        losses.append(float(loss.data))
    table.finalize()
    return table, float(np.mean(losses))


def recalibrate_bn(model: ModelGraph, data: ImageSet, batch_size: int, rng: np.random.Generator) -> None:
    """Re-estimate BN running statistics as a cumulative average over ``data``."""
    bns = [layer for layer in model.iter_layers() if isinstance(layer, BatchNorm2d)]
    saved = [bn.momentum for bn in bns]
    for bn in bns:
        bn.running_mean[:] = 0
        bn.running_var[:] = 1
    for b, (x, _) in enumerate(iterate_batches(data, batch_size, rng, augment=False)):
        for bn in bns:
            bn.momentum = 1.0 / (b + 1)
        model.forward(x, train=True)
    for bn, m in zip(bns, saved):
        bn.momentum = m


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, fields: list[str], rows: list[dict]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row.get(k)) for k in fields])
    tmp.replace(path)


def _parse(text: str):
    if text == "":
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _read_csv(path: Path) -> list[dict]:
    with path.open(newline="") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def checkpoint_name(iteration: int) -> str:
    return f"iter_{iteration:03d}.sqzp"


@dataclass
class SessionResult:
    rows: list[dict]
    model: ModelGraph
    victims: list[dict] = field(default_factory=list)


EvalHook = Callable[[int, ModelGraph], dict]


def prune_session(model: ModelGraph, train_set: ImageSet, val_set: ImageSet, schedule: PruneSchedule,
                  retrain_config: TrainConfig | None = None, eval_hook: EvalHook | None = None,
                  out_dir=None, seed: int = 0) -> SessionResult:
    """Prune ``schedule.iterations`` times, removing 1 step of the ORIGINAL filter count each time.

    Per iteration: draw a random training subset, run a scoring epoch
    (which also trains), remove the lowest-scoring groups, optionally retrain
    in place, then log stats and validation accuracy.  ``eval_hook(iteration,
    model)`` may add extra columns to any row.  With ``out_dir`` the
    log, victim list and a checkpoint per iteration are persisted after every
    iteration, and an interrupted session resumes from the last checkpoint.
    """
    out = Path(out_dir) if out_dir is not None else None
    x_val, y_val = eval_tensors(val_set), val_set.labels
    extra_fields: list[str] = []

    def record(it: int, m: ModelGraph, loss, retrained: bool) -> dict:
        stats = count_stats(m)
        _, acc = evaluate(m, x_val, y_val)
        row = {"iteration": it, "pruned_fraction": round(it * schedule.step_fraction, 10),
               "filters": stats.total_filters, "learnables": stats.learnables,
               "embedding_dim": stats.embedding_dim, "model_bytes": stats.model_bytes,
               "minibatch_loss": loss, "val_accuracy": acc, "retrained": int(retrained)}
        if eval_hook is not None:
            extra = eval_hook(it, m)
            for k in extra:
                if k not in extra_fields:
                    extra_fields.append(k)
            row.update(extra)
        return row

    def persist(rows, victims, m, it):
        if out is None:
            return
        save_checkpoint(m, out / checkpoint_name(it))
        _write_csv(out / VICTIMS_NAME, VICTIM_FIELDS, victims)
        _write_csv(out / LOG_NAME, LOG_FIELDS + extra_fields, rows)

    rows: list[dict] = []
    victims_log: list[dict] = []
    start = 1
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if (out / LOG_NAME).exists():
            rows = _read_csv(out / LOG_NAME)
            victims_log = _read_csv(out / VICTIMS_NAME) if (out / VICTIMS_NAME).exists() else []
            extra_fields = [k for k in rows[0] if k not in LOG_FIELDS] if rows else []
            while rows and not (out / checkpoint_name(int(rows[-1]["iteration"]))).exists():
                rows.pop()
            if rows:
                last = int(rows[-1]["iteration"])
                model = load_checkpoint(out / checkpoint_name(last))
                victims_log = [v for v in victims_log if int(v["iteration"]) <= last]
                start = last + 1
                log.info("resuming prune session at iteration %d", start)

    if not rows:
        rows.append(record(0, model, None, False))
        persist(rows, victims_log, model, 0)
    original = int(rows[0]["filters"])
    k = schedule.victims_per_iteration(original)

    for it in range(start, schedule.iterations + 1):
        rng = iteration_rng(seed, it)
        n_subset = max(1, int(round(schedule.subset_fraction * len(train_set))))
        subset = train_set.subset(np.sort(rng.choice(len(train_set), size=n_subset, replace=False)))
        groups = group_model(model)
        table, loss = scoring_epoch(model, subset, schedule, rng, groups)
        scores = normalize_per_layer(table.averaged, groups) if schedule.normalize_per_layer else table.averaged
        victims, exhausted = select_victims(scores, groups, k, schedule.floor)
        try:
            model = surgery(model, victims)
        except Exception:
            persist(rows, victims_log, model, it - 1)
            raise
        victims_log += [{"iteration": it, "layer": g.layer, "filter_index": g.filter_index,
                         "score": float(scores[g.group_id])} for g in victims]
        if schedule.recalibrate_bn:
            recalibrate_bn(model, subset, schedule.batch_size, iteration_rng(seed, it, 2))
        retrained = retrain_config is not None and schedule.retrains_at(it)
        if retrained:
            train(model, train_set, val_set, retrain_config, rng=iteration_rng(seed, it, 1))
        rows.append(record(it, model, loss, retrained))
        persist(rows, victims_log, model, it)
        log.info("iteration %d: removed %d filters, %d left, val acc %.3f", it, len(victims),
                 rows[-1]["filters"], rows[-1]["val_accuracy"])
        if exhausted:
            log.warning("iteration %d: no more eligible filter groups, stopping", it)
            break
    return SessionResult(rows, model, victims_log)
