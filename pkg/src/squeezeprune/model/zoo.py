"""Architecture family: the full face network and its width-divided micro variants."""

from __future__ import annotations

import copy
import json
from importlib import resources

import numpy as np

from .graph import ModelGraph
from .layers import BatchNorm2d, Conv2d, Fire, FireSpec, GlobalAvgPool, Linear, MaxPool2d, ReLU

MICRO_DIVISORS = (2, 4, 8)


def load_schedule(name: str = "full") -> dict:
    text = resources.files("squeezeprune.model").joinpath("configs", f"{name}.json").read_text()
    return json.loads(text)


def build_from_schedule(schedule: dict, num_classes: int, seed: int = 0, dtype=np.float32) -> ModelGraph:
    """Expand a layer schedule into a ``ModelGraph``.

    Every ``conv`` entry becomes conv -> BN -> ReLU; the schedule must end in
    a ``gap`` entry, after which the classifier ``fc`` is appended.
    """
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    rng = np.random.default_rng(seed)
    c = schedule.get("in_channels", 3)
    layers = []
    for node in schedule["layers"]:
        kind, name = node["kind"], node["name"]
        if kind == "conv":
            conv = Conv2d(name, c, node["filters"], node["kernel"], node.get("stride", 1), node.get("pad", 0),
                          rng=rng, dtype=dtype)
            bn_name = name.replace("conv", "bn") if "conv" in name else f"{name}_bn"
            layers += [conv, BatchNorm2d(bn_name, conv.out_channels, dtype=dtype),
                       ReLU(f"{name}_relu", source=name)]
            c = conv.out_channels
        elif kind == "fire":
            fire = Fire(name, c, FireSpec(node["squeeze"], node["expand1x1"], node["expand3x3"]), rng=rng, dtype=dtype)
            layers.append(fire)
            c = fire.out_channels
        elif kind == "maxpool":
            layers.append(MaxPool2d(name, node.get("kernel", 3), node.get("stride", 2)))
        elif kind == "gap":
            layers.append(GlobalAvgPool(name))
        else:
            raise ValueError(f"unknown layer kind {kind!r} in schedule")
    if not layers or not isinstance(layers[-1], GlobalAvgPool):
        raise ValueError("schedule must end with a gap layer")
    layers.append(Linear("fc", c, num_classes, rng=rng, dtype=dtype))
    model = ModelGraph(layers, schedule.get("in_channels", 3), schedule.get("input_size", 113),
                       schedule.get("name", "custom"))
    model.validate()
    return model


def micro_schedule(width_divisor: int) -> dict:
    if width_divisor not in MICRO_DIVISORS:
        raise ValueError(f"width_divisor must be one of {MICRO_DIVISORS}, got {width_divisor}")
    sched = copy.deepcopy(load_schedule("full"))
    sched["name"] = f"micro{width_divisor}"
    for node in sched["layers"]:
        for key in ("filters", "squeeze", "expand1x1", "expand3x3"):
            if key in node:
                n = node[key] // width_divisor
                if n < 2:
                    raise ValueError(f"{node['name']}.{key}: {node[key]} // {width_divisor} leaves {n} filters (< 2)")
                node[key] = n
    return sched


def build_full_config(num_classes: int, seed: int = 0, dtype=np.float32) -> ModelGraph:
    return build_from_schedule(load_schedule("full"), num_classes, seed, dtype)


def build_micro_config(num_classes: int, width_divisor: int = 8, seed: int = 0, dtype=np.float32) -> ModelGraph:
    return build_from_schedule(micro_schedule(width_divisor), num_classes, seed, dtype)


def build_config(name: str, num_classes: int, seed: int = 0) -> ModelGraph:
    """``full`` or ``micro2`` / ``micro4`` / ``micro8``."""
    if name == "full":
        return build_full_config(num_classes, seed)
    if name.startswith("micro"):
        return build_micro_config(num_classes, int(name[5:] or 8), seed)
    raise ValueError(f"unknown model config {name!r}")
