"""INI run configuration shared by all CLI commands.

See ``configs/example.ini`` at the repository root for an annotated file.
Unknown sections or keys are rejected so typos fail fast.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .pruning.session import PruneSchedule
from .training.config import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunSection:
    seed: int = 0
    out_dir: str = "runs/default"
    model: str = "micro8"


@dataclass
class DataSection:
    manifest: str = ""
    synth_dir: str = ""
    synth_identities: int = 40
    synth_per_pose: int = 10
    synth_image_size: int = 129
    synth_test_identities: int = 20


@dataclass
class TrainSection:
    batch_size: int = 128
    initial_lr: float = 0.01
    lr_ladder: list[float] = field(default_factory=lambda: [0.005, 0.001, 0.0001])
    plateau_patience: int = 3
    plateau_min_delta: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 0.0
    max_epochs: int = 30
    val_fraction: float = 0.02
    min_images_per_class: int = 70


@dataclass
class PruneSection:
    checkpoint: str = ""
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
    retrain_epochs: int = 3


@dataclass
class EvalSection:
    checkpoint: str = ""
    per_template: list[int] = field(default_factory=lambda: [1, 5])
    impostor_window: int = 100
    images_per_pose: int = 10
    split: str = "test"


SECTIONS = {"run": RunSection, "data": DataSection, "train": TrainSection, "prune": PruneSection,
            "eval": EvalSection}


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    data: DataSection = field(default_factory=DataSection)
    train: TrainSection = field(default_factory=TrainSection)
    prune: PruneSection = field(default_factory=PruneSection)
    eval: EvalSection = field(default_factory=EvalSection)
    source: Path | None = None

    @property
    def out_dir(self) -> Path:
        return Path(self.run.out_dir)

    def resolve(self, path: str) -> Path:
        """Relative paths in a config file are taken relative to that file."""
        p = Path(path)
        if p.is_absolute() or self.source is None:
            return p
        return self.source.parent / p

    def train_config(self, max_epochs: int | None = None) -> TrainConfig:
        t = self.train
        try:
            return TrainConfig(t.batch_size, t.initial_lr, list(t.lr_ladder), t.plateau_patience,
                               t.plateau_min_delta, t.momentum, t.weight_decay,
                               max_epochs if max_epochs is not None else t.max_epochs, self.run.seed,
                               t.val_fraction, t.min_images_per_class)
        except ValueError as exc:
            raise ConfigError(f"[train] {exc}") from exc

    def prune_schedule(self) -> PruneSchedule:
        p = self.prune
        try:
            return PruneSchedule(p.step_fraction, p.subset_fraction, p.retrain_every, p.max_total_fraction,
                                 p.scoring_lr, p.momentum, p.batch_size, p.floor, p.normalize_per_layer,
                                 p.recalibrate_bn)
        except ValueError as exc:
            raise ConfigError(f"[prune] {exc}") from exc

    def to_ini(self) -> str:
        lines = []
        for name in SECTIONS:
            section = getattr(self, name)
            lines.append(f"[{name}]")
            lines += [f"{f.name} = {_format(getattr(section, f.name))}" for f in fields(section)]
            lines.append("")
        return "\n".join(lines)


def _format(value) -> str:
    if isinstance(value, list):
        return ", ".join(str(v) for v in value)
    return str(value).lower() if isinstance(value, bool) else str(value)


def _convert(section: str, key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            lowered = raw.strip().lower()
            if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
                raise ValueError(f"not a boolean: {raw!r}")
            return configparser.ConfigParser.BOOLEAN_STATES[lowered]
        if isinstance(default, list):
            item = type(default[0]) if default else float
            return [item(v) for v in raw.replace(",", " ").split()]
        return type(default)(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def parse_config(text: str, source: Path | None = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(source) if source else "<string>")
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig(source=source)
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]; expected one of {sorted(SECTIONS)}")
        section = getattr(cfg, name)
        known = {f.name: f for f in fields(section)}
        for key, raw in parser[name].items():
            if key not in known:
                raise ConfigError(f"[{name}] unknown key {key!r}")
            setattr(section, key, _convert(name, key, raw, getattr(section, key)))
    if cfg.eval.split not in ("train", "test"):
        raise ConfigError(f"[eval] split must be train or test, got {cfg.eval.split!r}")
    cfg.train_config()
    cfg.prune_schedule()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path)
