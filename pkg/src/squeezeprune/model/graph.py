"""Ordered layer graph with explicit channel wiring."""

from __future__ import annotations

import copy
from typing import Iterator

import numpy as np

from ..autodiff import Tensor
from .layers import BatchNorm2d, Conv2d, Fire, GlobalAvgPool, Layer, Linear


class ChannelError(ValueError):
    """Channel counts disagree along an edge of the graph."""


class ModelGraph:
    """Sequential SqueezeNet-style graph: conv/bn/relu/maxpool/fire nodes, GAP, FC head.

    The GAP output is the face descriptor; the final ``Linear`` is the
    identity classifier used only during training.
    """

    def __init__(self, layers: list[Layer], in_channels: int = 3, input_size: int = 113, config_name: str = "custom"):
        self.layers = layers
        self.in_channels = in_channels
        self.input_size = input_size
        self.config_name = config_name

    # ------------------------------------------------------------------ access

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [item for layer in self.layers for item in layer.parameters()]

    def param_tensors(self) -> list[Tensor]:
        return [t for _, t in self.parameters()]

    def named_params(self) -> dict[str, Tensor]:
        return dict(self.parameters())

    def buffers(self) -> list[tuple[str, np.ndarray]]:
        return [item for layer in self.layers for item in layer.buffers()]

    def conv_bn_pairs(self) -> list[tuple[Conv2d, BatchNorm2d]]:
        """Every conv with the BN that normalizes it, in execution order."""
        pairs = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Fire):
                pairs.extend(layer.conv_bn_pairs())
            elif isinstance(layer, Conv2d):
                nxt = self.layers[i + 1] if i + 1 < len(self.layers) else None
                if not isinstance(nxt, BatchNorm2d):
                    raise ChannelError(f"{layer.name}: conv not followed by batch norm")
                pairs.append((layer, nxt))
        return pairs

    def convs(self) -> list[Conv2d]:
        return [c for c, _ in self.conv_bn_pairs()]

    @property
    def classifier(self) -> Linear:
        heads = [layer for layer in self.layers if isinstance(layer, Linear)]
        if len(heads) != 1:
            raise ChannelError(f"expected one classifier layer, found {len(heads)}")
        return heads[0]

    @property
    def num_classes(self) -> int:
        return self.classifier.out_features

    @property
    def dtype(self):
        return self.param_tensors()[0].dtype

    # ----------------------------------------------------------------- forward

    def forward(self, x, train: bool = False, ablate: dict | None = None,
                return_embedding: bool = False):
        """Run the network on an NCHW batch.

        Returns logits, or ``(embedding, logits)`` when ``return_embedding``.
        """
        ablate = ablate or {}
        out = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=self.dtype))
        embedding = None
        for layer in self.layers:
            out = layer.forward(out, train, ablate)
            if isinstance(layer, GlobalAvgPool):
                embedding = out
        if return_embedding:
            return embedding, out
        return out

    def embed(self, x, ablate: dict | None = None) -> np.ndarray:
        """GAP descriptor in eval mode, as a plain array."""
        ablate = ablate or {}
        out = Tensor(np.asarray(x, dtype=self.dtype))
        for layer in self.layers:
            out = layer.forward(out, False, ablate)
            if isinstance(layer, GlobalAvgPool):
                return out.data
        raise ChannelError("model has no global average pooling layer")

    __call__ = forward

    # ------------------------------------------------------------- consistency

    def validate(self) -> None:
        """Check channel counts along every edge and tensor shapes; raise ``ChannelError``."""
        seen: set[int] = set()
        for name, t in self.parameters():
            if id(t) in seen:
                raise ChannelError(f"parameter {name} is shared by more than one layer")
            seen.add(id(t))

        def check_conv(conv: Conv2d, c: int, producer: str) -> int:
            if conv.in_channels != c:
                raise ChannelError(f"{producer} -> {conv.name}: produces {c} channels, "
                                   f"consumer expects {conv.in_channels}")
            want = (conv.out_channels, conv.in_channels, conv.kernel, conv.kernel)
            if conv.weight.shape != want or conv.bias.shape != (conv.out_channels,):
                raise ChannelError(f"{conv.name}: weight {conv.weight.shape} / bias {conv.bias.shape} "
                                   f"do not match attributes {want}")
            if conv.out_channels < 1:
                raise ChannelError(f"{conv.name}: no filters left")
            return conv.out_channels

        def check_bn(bn: BatchNorm2d, c: int, producer: str) -> int:
            shapes = {bn.gamma.shape, bn.beta.shape, bn.running_mean.shape, bn.running_var.shape}
            if bn.channels != c or shapes != {(c,)}:
                raise ChannelError(f"{producer} -> {bn.name}: produces {c} channels, batch norm holds "
                                   f"{bn.channels} ({sorted(shapes)})")
            return c

        c = self.in_channels
        producer = "input"
        gap_seen = False
        for layer in self.layers:
            if isinstance(layer, Conv2d):
                c = check_conv(layer, c, producer)
                producer = layer.name
            elif isinstance(layer, BatchNorm2d):
                c = check_bn(layer, c, producer)
            elif isinstance(layer, Fire):
                if layer.in_channels != c:
                    raise ChannelError(f"{producer} -> {layer.name}: produces {c} channels, "
                                       f"fire expects {layer.in_channels}")
                s = check_conv(layer.squeeze, c, producer)
                check_bn(layer.squeeze_bn, s, layer.squeeze.name)
                e1 = check_conv(layer.expand1x1, s, layer.squeeze.name)
                check_bn(layer.expand1x1_bn, e1, layer.expand1x1.name)
                e3 = check_conv(layer.expand3x3, s, layer.squeeze.name)
                check_bn(layer.expand3x3_bn, e3, layer.expand3x3.name)
                c = e1 + e3
                producer = f"{layer.name}.concat"
            elif isinstance(layer, GlobalAvgPool):
                gap_seen = True
            elif isinstance(layer, Linear):
                if not gap_seen:
                    raise ChannelError(f"{layer.name}: classifier before global pooling")
                if layer.in_features != c or layer.weight.shape != (layer.out_features, c):
                    raise ChannelError(f"{producer} -> {layer.name}: produces {c} features, "
                                       f"classifier expects {layer.in_features} (weight {layer.weight.shape})")
                c = layer.out_features
        if not gap_seen:
            raise ChannelError("model has no global average pooling layer")

    def embedding_dim(self) -> int:
        c = self.in_channels
        for layer in self.layers:
            if isinstance(layer, (Conv2d, Fire)):
                c = layer.out_channels
            elif isinstance(layer, GlobalAvgPool):
                return c
        raise ChannelError("model has no global average pooling layer")

    # ------------------------------------------------------------------ copies

    def copy(self) -> "ModelGraph":
        return copy.deepcopy(self)

    def astype(self, dtype) -> "ModelGraph":
        """Deep copy with every parameter and buffer cast to ``dtype``."""
        clone = self.copy()
        for _, t in clone.parameters():
            t.data = t.data.astype(dtype)
            t.grad = None
        for layer in clone.iter_layers():
            if isinstance(layer, BatchNorm2d):
                layer.running_mean = layer.running_mean.astype(dtype)
                layer.running_var = layer.running_var.astype(dtype)
        return clone

    def iter_layers(self) -> Iterator[Layer]:
        for layer in self.layers:
            if isinstance(layer, Fire):
                yield layer
                yield from layer.sublayers()
            else:
                yield layer

    def zero_grad(self) -> None:
        for t in self.param_tensors():
            t.zero_grad()

    def __repr__(self) -> str:
        return f"ModelGraph({self.config_name!r}, {len(self.layers)} layers, {len(self.convs())} convs)"
