import numpy as np
import pytest

from squeezeprune.model.graph import ModelGraph
from squeezeprune.model.layers import BatchNorm2d, Conv2d, Fire, FireSpec, GlobalAvgPool, Linear, MaxPool2d, ReLU


def tiny_fire_net(rng, in_channels=3, stem=6, fires=((3, 4, 4), (2, 3, 5)), embed=6, num_classes=3,
                  dtype=np.float64, pool=True):
    """conv -> bn -> relu [-> maxpool] -> fires -> conv -> bn -> relu -> gap -> fc."""
    layers = [Conv2d("conv1", in_channels, stem, 3, pad=1, rng=rng, dtype=dtype), BatchNorm2d("bn1", stem, dtype),
              ReLU("conv1_relu", "conv1")]
    if pool:
        layers.append(MaxPool2d("pool1"))
    c = stem
    for i, spec in enumerate(fires):
        fire = Fire(f"fire{i + 2}", c, FireSpec(*spec), rng=rng, dtype=dtype)
        layers.append(fire)
        c = fire.out_channels
    layers += [Conv2d("conv10", c, embed, 1, rng=rng, dtype=dtype), BatchNorm2d("bn10", embed, dtype),
               ReLU("conv10_relu", "conv10"), GlobalAvgPool("gap"), Linear("fc", embed, num_classes, rng, dtype)]
    model = ModelGraph(layers, in_channels=in_channels, input_size=9, config_name="tiny")
    randomize_bn(model, rng)
    model.validate()
    return model


def randomize_bn(model, rng):
    """Non-trivial BN parameters and running statistics."""
    for layer in model.iter_layers():
        if isinstance(layer, BatchNorm2d):
            n = layer.channels
            layer.gamma.data[:] = rng.uniform(0.5, 1.5, n)
            layer.beta.data[:] = rng.normal(0, 0.3, n)
            layer.running_mean[:] = rng.normal(0, 0.3, n)
            layer.running_var[:] = rng.uniform(0.5, 2.0, n)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# criterion number -> one-line verdict, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
