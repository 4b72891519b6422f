"""Filter groups: one conv output filter and everything that dies with it."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..model.graph import ChannelError, ModelGraph
from ..model.layers import Conv2d, Fire, Linear


@dataclass
class FilterGroup:
    """A prunable unit.

    ``members`` lists ``(tensor name, filter index)`` slots: the conv weight
    row, its bias element, and the BN gamma/beta/running-stat entries.
    ``consumers`` lists ``(layer name, input-channel index)`` for every
    downstream conv or classifier reading this filter's output, with
    concat offsets already applied.
    """

    group_id: int
    layer: str
    layer_index: int
    filter_index: int
    bn: str
    members: list[tuple[str, int]] = field(default_factory=list)
    consumers: list[tuple[str, int]] = field(default_factory=list)

    @property
    def key(self) -> tuple[int, int]:
        return self.layer_index, self.filter_index


def channel_consumers(model: ModelGraph) -> dict[tuple[str, int], list[tuple[str, int]]]:
    """Map ``(conv name, filter)`` to its downstream ``(consumer, input channel)`` slots."""
    consumers: dict[tuple[str, int], list[tuple[str, int]]] = {}
    current: list[tuple[str, int] | None] = [None] * model.in_channels

    def consume(layer_name: str, sources, expected: int):
        if len(sources) != expected:
            raise ChannelError(f"cannot resolve wiring into {layer_name}: {len(sources)} channels arrive, "
                               f"{expected} expected")
        for idx, src in enumerate(sources):
            if src is not None:
                consumers.setdefault(src, []).append((layer_name, idx))

    def produce(conv: Conv2d):
        out = [(conv.name, f) for f in range(conv.out_channels)]
        for src in out:
            consumers.setdefault(src, [])
        return out

    for layer in model.layers:
        if isinstance(layer, Conv2d):
            consume(layer.name, current, layer.in_channels)
            current = produce(layer)
        elif isinstance(layer, Fire):
            consume(layer.squeeze.name, current, layer.squeeze.in_channels)
            squeezed = produce(layer.squeeze)
            consume(layer.expand1x1.name, squeezed, layer.expand1x1.in_channels)
            consume(layer.expand3x3.name, squeezed, layer.expand3x3.in_channels)
            current = produce(layer.expand1x1) + produce(layer.expand3x3)
        elif isinstance(layer, Linear):
            consume(layer.name, current, layer.in_features)
            current = [None] * layer.out_features
    return consumers


def group_model(model: ModelGraph) -> list[FilterGroup]:
    """One group per conv output filter, ordered by (layer index, filter index)."""
    consumers = channel_consumers(model)
    groups = []
    for layer_index, (conv, bn) in enumerate(model.conv_bn_pairs()):
        for f in range(conv.out_channels):
            members = [(f"{conv.name}.weight", f), (f"{conv.name}.bias", f),
                       (f"{bn.name}.gamma", f), (f"{bn.name}.beta", f),
                       (f"{bn.name}.running_mean", f), (f"{bn.name}.running_var", f)]
            groups.append(FilterGroup(len(groups), conv.name, layer_index, f, bn.name, members,
                                      list(consumers.get((conv.name, f), []))))
    return groups


def unprunable_parameters(model: ModelGraph) -> list[str]:
    """Trainable tensors that belong to no group (the classifier head)."""
    head = model.classifier
    return [name for name, _ in head.parameters()]


def group_scalar_count(model: ModelGraph, group: FilterGroup) -> int:
    conv = next(c for c in model.convs() if c.name == group.layer)
    return conv.weight.data[group.filter_index].size + 5
