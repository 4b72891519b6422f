"""Layer nodes of the model graph.

Each layer owns its parameter tensors and BN buffers.  ``forward`` takes an
``ablate`` mapping ``conv name -> keep mask`` that zeroes the post-ReLU
output of the listed filters; it is how functional ablation is expressed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor


@dataclass(frozen=True)
class FireSpec:
    squeeze_1x1: int
    expand_1x1: int
    expand_3x3: int

    def __post_init__(self):
        if min(self.squeeze_1x1, self.expand_1x1, self.expand_3x3) < 1:
            raise ValueError(f"fire filter counts must be >= 1, got {self}")

    @property
    def out_channels(self) -> int:
        return self.expand_1x1 + self.expand_3x3


class Layer:
    kind = "layer"

    def __init__(self, name: str):
        self.name = name

    def parameters(self) -> Iterator[tuple[str, Tensor]]:
        return iter(())

    def buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(())

    def attributes(self) -> list[int]:
        return []

    def forward(self, x: Tensor, train: bool, ablate: dict) -> Tensor:
        raise NotImplementedError


class Conv2d(Layer):
    kind = "conv"

    def __init__(self, name: str, in_channels: int, out_channels: int, kernel: int, stride: int = 1,
                 pad: int = 0, rng: np.random.Generator | None = None, dtype=np.float32):
        super().__init__(name)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        fan_in = in_channels * kernel * kernel
        rng = rng if rng is not None else np.random.default_rng(0)
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(out_channels, in_channels, kernel, kernel))
        self.weight = Tensor(w.astype(dtype), requires_grad=True, name=f"{name}.weight")
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True, name=f"{name}.bias")

    def parameters(self):
        yield f"{self.name}.weight", self.weight
        yield f"{self.name}.bias", self.bias

    def attributes(self):
        return [self.in_channels, self.out_channels, self.kernel, self.stride, self.pad]

    def forward(self, x, train, ablate):
        return ad.conv2d(x, self.weight, self.bias, self.stride, self.pad, layer=self.name)


class BatchNorm2d(Layer):
    kind = "bn"

    def __init__(self, name: str, channels: int, dtype=np.float32):
        super().__init__(name)
        self.channels = channels
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True, name=f"{name}.gamma")
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True, name=f"{name}.beta")
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = ad.BN_MOMENTUM

    def parameters(self):
        yield f"{self.name}.gamma", self.gamma
        yield f"{self.name}.beta", self.beta

    def buffers(self):
        yield f"{self.name}.running_mean", self.running_mean
        yield f"{self.name}.running_var", self.running_var

    def attributes(self):
        return [self.channels]

    def forward(self, x, train, ablate):
        return ad.batchnorm2d(x, self.gamma, self.beta, self.running_mean, self.running_var, train,
                              momentum=self.momentum, layer=self.name)


class ReLU(Layer):
    """ReLU; ``source`` names the conv whose filters it gates for ablation."""

    kind = "relu"

    def __init__(self, name: str, source: str | None = None):
        super().__init__(name)
        self.source = source

    def forward(self, x, train, ablate):
        out = ad.relu(x)
        if self.source is not None and self.source in ablate:
            out = ad.channel_mask(out, ablate[self.source])
        return out


class MaxPool2d(Layer):
    kind = "maxpool"

    def __init__(self, name: str, kernel: int = 3, stride: int = 2):
        super().__init__(name)
        self.kernel = kernel
        self.stride = stride

    def attributes(self):
        return [self.kernel, self.stride]

    def forward(self, x, train, ablate):
        return ad.maxpool2d(x, self.kernel, self.stride, layer=self.name)


class GlobalAvgPool(Layer):
    kind = "gap"

    def forward(self, x, train, ablate):
        return ad.global_avg_pool(x, layer=self.name)


class Linear(Layer):
    kind = "fc"

    def __init__(self, name: str, in_features: int, out_features: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        super().__init__(name)
        self.in_features = in_features
        self.out_features = out_features
        rng = rng if rng is not None else np.random.default_rng(0)
        w = rng.normal(0.0, np.sqrt(1.0 / in_features), size=(out_features, in_features))
        self.weight = Tensor(w.astype(dtype), requires_grad=True, name=f"{name}.weight")
        self.bias = Tensor(np.zeros(out_features, dtype=dtype), requires_grad=True, name=f"{name}.bias")

    def parameters(self):
        yield f"{self.name}.weight", self.weight
        yield f"{self.name}.bias", self.bias

    def attributes(self):
        return [self.in_features, self.out_features]

    def forward(self, x, train, ablate):
        return ad.linear(x, self.weight, self.bias, layer=self.name)


class Fire(Layer):
    """Squeeze 1x1 -> (expand 1x1 || expand 3x3) -> concat, BN+ReLU after each conv.

    Concat order: the expand-1x1 block precedes the expand-3x3 block.
    """

    kind = "fire"

    def __init__(self, name: str, in_channels: int, spec: FireSpec,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        super().__init__(name)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels = in_channels
        s, e1, e3 = spec.squeeze_1x1, spec.expand_1x1, spec.expand_3x3
        self.squeeze = Conv2d(f"{name}.squeeze", in_channels, s, 1, rng=rng, dtype=dtype)
        self.squeeze_bn = BatchNorm2d(f"{name}.squeeze_bn", s, dtype=dtype)
        self.expand1x1 = Conv2d(f"{name}.expand1x1", s, e1, 1, rng=rng, dtype=dtype)
        self.expand1x1_bn = BatchNorm2d(f"{name}.expand1x1_bn", e1, dtype=dtype)
        self.expand3x3 = Conv2d(f"{name}.expand3x3", s, e3, 3, pad=1, rng=rng, dtype=dtype)
        self.expand3x3_bn = BatchNorm2d(f"{name}.expand3x3_bn", e3, dtype=dtype)

    @property
    def spec(self) -> FireSpec:
        return FireSpec(self.squeeze.out_channels, self.expand1x1.out_channels, self.expand3x3.out_channels)

    @property
    def out_channels(self) -> int:
        return self.expand1x1.out_channels + self.expand3x3.out_channels

    def sublayers(self) -> list[Layer]:
        return [self.squeeze, self.squeeze_bn, self.expand1x1, self.expand1x1_bn, self.expand3x3, self.expand3x3_bn]

    def conv_bn_pairs(self) -> list[tuple[Conv2d, BatchNorm2d]]:
        return [(self.squeeze, self.squeeze_bn), (self.expand1x1, self.expand1x1_bn),
                (self.expand3x3, self.expand3x3_bn)]

    def parameters(self):
        for layer in self.sublayers():
            yield from layer.parameters()

    def buffers(self):
        for layer in self.sublayers():
            yield from layer.buffers()

    def attributes(self):
        s = self.spec
        return [self.in_channels, s.squeeze_1x1, s.expand_1x1, s.expand_3x3]

    def _branch(self, x, conv, bn, train, ablate):
        out = ad.relu(bn.forward(conv.forward(x, train, ablate), train, ablate))
        if conv.name in ablate:
            out = ad.channel_mask(out, ablate[conv.name])
        return out

    def forward(self, x, train, ablate):
        sq = self._branch(x, self.squeeze, self.squeeze_bn, train, ablate)
        e1 = self._branch(sq, self.expand1x1, self.expand1x1_bn, train, ablate)
        e3 = self._branch(sq, self.expand3x3, self.expand3x3_bn, train, ablate)
        return ad.concat_channels([e1, e3], layer=f"{self.name}.concat")
