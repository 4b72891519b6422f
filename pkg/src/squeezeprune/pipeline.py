"""Run-directory level steps behind the CLI commands.

Layout of a run directory::

    config.ini              snapshot of the effective configuration
    data/                   synthetic dataset (synth)
    train/model.sqzp        trained checkpoint, plus history.csv (train)
    prune/                  iter_XXX.sqzp, prune_log.csv, victims.csv (prune)
    eval/<checkpoint>/      scores_<n>img.csv, eer_<n>img.json (eval)
    report/                 SVG charts (report)
"""

from __future__ import annotations

import logging
from pathlib import Path

from .config import ConfigError, RunConfig
from .data import check_pose_set, load_imageset, load_manifest, synthesize_dataset
from .data.manifest import Manifest
from .model import build_config, load_checkpoint, save_checkpoint
from .model.graph import ModelGraph
from .pruning.session import LOG_NAME, SessionResult, prune_session
from .report import render_prune_report
from .training import split_train_val, train
from .verification import VerificationReport, describe_imageset, verify, write_eer_json, write_scores_csv

log = logging.getLogger(__name__)

TRAINED = Path("train") / "model.sqzp"


def snapshot_config(cfg: RunConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / "config.ini"
    path.write_text(cfg.to_ini())
    return path


def manifest_path(cfg: RunConfig) -> Path:
    if cfg.data.manifest:
        return cfg.resolve(cfg.data.manifest)
    return synth_dir(cfg) / "manifest.csv"


def synth_dir(cfg: RunConfig) -> Path:
    return cfg.resolve(cfg.data.synth_dir) if cfg.data.synth_dir else cfg.out_dir / "data"


def require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path


def cmd_synth(cfg: RunConfig) -> Manifest:
    d = cfg.data
    return synthesize_dataset(d.synth_identities, d.synth_per_pose, d.synth_image_size, cfg.run.seed,
                              synth_dir(cfg), d.synth_test_identities)


def train_val_sets(cfg: RunConfig):
    manifest = load_manifest(require_file(manifest_path(cfg), "manifest"))
    tc = cfg.train_config()
    return split_train_val(load_imageset(manifest, "train"), tc.val_fraction, cfg.run.seed,
                           tc.min_images_per_class)


def cmd_train(cfg: RunConfig) -> ModelGraph:
    tr, va = train_val_sets(cfg)
    try:
        model = build_config(cfg.run.model, tr.num_classes, seed=cfg.run.seed)
    except ValueError as exc:
        raise ConfigError(f"[run] model: {exc}") from exc
    history = train(model, tr, va, cfg.train_config())
    out = cfg.out_dir / TRAINED
    out.parent.mkdir(parents=True, exist_ok=True)
    history.write_csv(out.parent / "history.csv")
    save_checkpoint(model, out)
    log.info("saved %s", out)
    return model


def cmd_prune(cfg: RunConfig) -> SessionResult:
    src = cfg.resolve(cfg.prune.checkpoint) if cfg.prune.checkpoint else cfg.out_dir / TRAINED
    model = load_checkpoint(require_file(src, "trained checkpoint"))
    tr, va = train_val_sets(cfg)
    retrain = cfg.train_config(max_epochs=cfg.prune.retrain_epochs) if cfg.prune.retrain_epochs > 0 else None
    return prune_session(model, tr, va, cfg.prune_schedule(), retrain, out_dir=cfg.out_dir / "prune",
                         seed=cfg.run.seed)


def evaluate_checkpoint(model: ModelGraph, cfg: RunConfig, out_dir: Path | None = None
                        ) -> dict[int, VerificationReport]:
    manifest = load_manifest(require_file(manifest_path(cfg), "manifest"))
    e = cfg.eval
    check_pose_set(manifest, e.split, e.images_per_pose)
    descriptors = describe_imageset(model, load_imageset(manifest, e.split))
    reports = {}
    for n in e.per_template:
        try:
            report = verify(descriptors, n, e.images_per_pose, e.impostor_window)
        except ValueError as exc:
            raise ConfigError(f"[eval] {exc}") from exc
        reports[n] = report
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_scores_csv(out_dir / f"scores_{n}img.csv", report)
            write_eer_json(out_dir / f"eer_{n}img.json", report, {"seed": cfg.run.seed})
        log.info("%d-image templates: pooled EER %.4f, mean pair EER %.4f", n, report.pooled_eer,
                 report.mean_eer)
    return reports


def cmd_eval(cfg: RunConfig, checkpoint: str | None = None) -> dict[int, VerificationReport]:
    chosen = checkpoint or cfg.eval.checkpoint
    src = cfg.resolve(chosen) if chosen else cfg.out_dir / TRAINED
    model = load_checkpoint(require_file(src, "checkpoint"))
    return evaluate_checkpoint(model, cfg, cfg.out_dir / "eval" / src.stem)


def cmd_report(run_dir) -> list[Path]:
    run = Path(run_dir)
    return render_prune_report(require_file(run / "prune" / LOG_NAME, "prune log"), run / "report")
