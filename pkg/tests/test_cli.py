import csv
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from squeezeprune import pipeline
from squeezeprune.autodiff import NumericError
from squeezeprune.cli import EXIT_CONFIG, EXIT_DATA, EXIT_IO, EXIT_NUMERIC, main
from squeezeprune.config import ConfigError, RunConfig, load_config, parse_config
from squeezeprune.data import ManifestRow, POSES, write_manifest
from squeezeprune.pruning import LOG_FIELDS

EXAMPLE = Path(__file__).resolve().parents[1] / "configs" / "example.ini"
SVG = "{http://www.w3.org/2000/svg}"


def test_example_config_loads():
    cfg = load_config(EXAMPLE)
    assert cfg.run.model == "micro8"
    assert cfg.eval.per_template == [1, 5]
    assert cfg.train.lr_ladder == [0.005, 0.001, 0.0001]
    assert cfg.prune_schedule().retrain_every == 5


def test_config_round_trips_through_ini():
    cfg = parse_config("[run]\nseed = 7\n[prune]\nrecalibrate_bn = yes\n")
    again = parse_config(cfg.to_ini())
    assert again.run == cfg.run and again.prune == cfg.prune and again.eval == cfg.eval
    assert again.prune.recalibrate_bn is True


@pytest.mark.parametrize("text,match", [
    ("[train]\nlearning_rate = 0.1\n", "unknown key"),
    ("[trian]\n", "unknown section"),
    ("[train]\nbatch_size = many\n", "batch_size"),
    ("[train]\nlr_ladder = 0.02\n", "strictly decreasing"),
    ("[prune]\nstep_fraction = 0\n", r"\[prune\]"),
])
def test_config_rejections(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_relative_paths_resolve_against_config(tmp_path):
    path = tmp_path / "sub" / "run.ini"
    path.parent.mkdir()
    path.write_text("[data]\nmanifest = m.csv\n")
    assert pipeline.manifest_path(load_config(path)) == tmp_path / "sub" / "m.csv"


def test_exit_code_for_bad_config(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nsed = 1\n")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "run")]) == EXIT_CONFIG


def test_exit_code_for_missing_manifest(tmp_path):
    assert main(["train", "--out", str(tmp_path / "run")]) == EXIT_CONFIG


def test_exit_code_for_undecodable_image(tmp_path):
    rows = [ManifestRow(f"{i}_{p}_{k}.ppm", f"id{i}", p, "train")
            for i in range(2) for p in POSES for k in range(2)]
    write_manifest(tmp_path / "manifest.csv", rows)
    for r in rows:
        (tmp_path / r.path).write_bytes(b"not an image")
    cfg = tmp_path / "run.ini"
    cfg.write_text("[data]\nmanifest = manifest.csv\n")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "run")]) == EXIT_DATA


def test_exit_code_for_corrupt_checkpoint(tmp_path):
    ckpt = tmp_path / "broken.sqzp"
    ckpt.write_bytes(b"XXXX" + bytes(64))
    assert main(["eval", "--checkpoint", str(ckpt), "--out", str(tmp_path / "run")]) == EXIT_IO


def test_exit_code_for_numeric_failure(tmp_path, monkeypatch):
    def explode(cfg):
        raise NumericError("non-finite loss")

    monkeypatch.setattr(pipeline, "cmd_train", explode)
    assert main(["train", "--out", str(tmp_path / "run")]) == EXIT_NUMERIC


def test_snapshot_written(tmp_path):
    main(["train", "--seed", "3", "--out", str(tmp_path / "run")])
    snap = load_config(tmp_path / "run" / "config.ini")
    assert snap.run.seed == 3


def write_log(path: Path, iterations: int, with_eer: bool = False):
    fields = LOG_FIELDS + (["eer_1img"] if with_eer else [])
    rng = np.random.default_rng(0)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fields, lineterminator="\n")
        writer.writeheader()
        for it in range(iterations + 1):
            row = {"iteration": it, "pruned_fraction": round(it * 0.01, 10), "filters": 493 - 5 * it,
                   "learnables": 120000 - 900 * it, "embedding_dim": 125 - it // 3,
                   "model_bytes": 480000 - 3600 * it, "minibatch_loss": "" if it == 0 else rng.uniform(0.2, 1),
                   "val_accuracy": rng.uniform(0.8, 1.0), "retrained": int(it % 5 == 1)}
            if with_eer:
                row["eer_1img"] = rng.uniform(0.05, 0.2) if it % 5 == 0 else ""
            writer.writerow(row)


def panels(svg_path):
    root = ET.parse(svg_path).getroot()
    return [g for g in root.iter(f"{SVG}g") if g.get("class") == "panel"]


def test_report_renders_ten_iteration_log(tmp_path):
    (tmp_path / "prune").mkdir()
    write_log(tmp_path / "prune" / "prune_log.csv", 10, with_eer=True)
    assert main(["report", str(tmp_path)]) == 0
    report = tmp_path / "report"
    assert sorted(p.name for p in report.iterdir()) == ["eer.svg", "loss_accuracy.svg", "model_stats.svg"]
    stats = panels(report / "model_stats.svg")
    titles = [g.find(f"{SVG}text").text for g in stats]
    assert titles == ["Filters", "Learnables", "Embedding size", "Model size (bytes)"]
    for g in stats:
        labels = [t.text for t in g.iter(f"{SVG}text")]
        assert "Pruned filters (%)" in labels
        assert "0" in labels and "10" in labels
        assert len(g.findall(f"{SVG}polyline")) == 1
    # iteration 0 has no scoring loss, so that series starts one step later
    loss_panel = panels(report / "loss_accuracy.svg")[0]
    assert len(loss_panel.find(f"{SVG}polyline").get("points").split()) == 10


def test_report_without_log_is_config_error(tmp_path):
    assert main(["report", str(tmp_path)]) == EXIT_CONFIG


def test_default_config_matches_dataclasses():
    cfg = RunConfig()
    assert cfg.prune_schedule().step_fraction == 0.01
    assert cfg.train_config().batch_size == 128
