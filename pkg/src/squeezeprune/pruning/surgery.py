"""Structural filter removal with downstream channel remapping."""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable

import numpy as np

from ..model.graph import ChannelError, ModelGraph
from ..model.layers import Fire
from .groups import FilterGroup


class SurgeryError(RuntimeError):
    pass


def _keep(n: int, drop: set[int], what: str) -> np.ndarray:
    bad = [i for i in drop if not 0 <= i < n]
    if bad:
        raise SurgeryError(f"{what}: indices {sorted(bad)} out of range for {n} channels")
    mask = np.ones(n, dtype=bool)
    mask[list(drop)] = False
    return mask


def ablation_masks(model: ModelGraph, victims: Iterable[FilterGroup]) -> dict[str, np.ndarray]:
    """Keep-masks that zero the victims' post-ReLU channels."""
    sizes = {c.name: c.out_channels for c in model.convs()}
    masks: dict[str, np.ndarray] = {}
    for g in victims:
        mask = masks.setdefault(g.layer, np.ones(sizes[g.layer], dtype=bool))
        mask[g.filter_index] = False
    return masks


def surgery(model: ModelGraph, victims: Iterable[FilterGroup]) -> ModelGraph:
    """Return a pruned copy of ``model``; the input model is never modified.

    Each victim loses its conv weight row, bias, and BN channel; every
    consumer loses the matching input-channel slice.  The result is
    validated before it is returned.
    """
    victims = list(victims)
    drop_out: dict[str, set[int]] = defaultdict(set)
    drop_in: dict[str, set[int]] = defaultdict(set)
    for g in victims:
        drop_out[g.layer].add(g.filter_index)
        for consumer, idx in g.consumers:
            drop_in[consumer].add(idx)

    new = model.copy()
    pairs = new.conv_bn_pairs()
    known = {c.name for c, _ in pairs} | {new.classifier.name}
    unknown = (set(drop_out) | set(drop_in)) - known
    if unknown:
        raise SurgeryError(f"victims reference unknown layers {sorted(unknown)}")

    for conv, bn in pairs:
        out_keep = _keep(conv.out_channels, drop_out.get(conv.name, set()), conv.name)
        in_keep = _keep(conv.in_channels, drop_in.get(conv.name, set()), f"{conv.name} input")
        if not out_keep.all() or not in_keep.all():
            conv.weight.data = np.ascontiguousarray(conv.weight.data[out_keep][:, in_keep])
            conv.bias.data = np.ascontiguousarray(conv.bias.data[out_keep])
            conv.out_channels = int(out_keep.sum())
            conv.in_channels = int(in_keep.sum())
        if not out_keep.all():
            bn.gamma.data = np.ascontiguousarray(bn.gamma.data[out_keep])
            bn.beta.data = np.ascontiguousarray(bn.beta.data[out_keep])
            bn.running_mean = np.ascontiguousarray(bn.running_mean[out_keep])
            bn.running_var = np.ascontiguousarray(bn.running_var[out_keep])
            bn.channels = int(out_keep.sum())

    head = new.classifier
    in_keep = _keep(head.in_features, drop_in.get(head.name, set()), f"{head.name} input")
    if not in_keep.all():
        head.weight.data = np.ascontiguousarray(head.weight.data[:, in_keep])
        head.in_features = int(in_keep.sum())

    for layer in new.layers:
        if isinstance(layer, Fire):
            layer.in_channels = layer.squeeze.in_channels
    for t in new.param_tensors():
        t.grad = None

    try:
        new.validate()
    except ChannelError as exc:
        raise SurgeryError(f"pruned model is inconsistent: {exc}") from exc
    return new
