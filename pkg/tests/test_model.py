import json

import numpy as np
import pytest

from squeezeprune.model import (
    BadMagicError,
    BatchNorm2d,
    ChannelError,
    Conv2d,
    CorruptHeaderError,
    Fire,
    FireSpec,
    GlobalAvgPool,
    Linear,
    ModelGraph,
    ReLU,
    ShapeTableError,
    TruncatedPayloadError,
    VersionError,
    build_full_config,
    build_micro_config,
    count_stats,
    learnables_excluding_classifier,
    load_checkpoint,
    micro_schedule,
    save_checkpoint,
)
from squeezeprune.model import checkpoint as ckpt

from conftest import tiny_fire_net


@pytest.fixture(scope="module")
def full():
    return build_full_config(10)


@pytest.fixture(scope="module")
def micro():
    return build_micro_config(20, 8)


def test_fire_spec_rejects_zero():
    with pytest.raises(ValueError):
        FireSpec(0, 4, 4)
    assert FireSpec(2, 3, 5).out_channels == 8


def test_full_config_structure(full):
    assert full.embedding_dim() == 1000
    for layer in full.layers:
        if isinstance(layer, Fire):
            assert layer.out_channels == layer.expand1x1.out_channels + layer.expand3x3.out_channels
    first = full.layers[0]
    assert isinstance(first, Conv2d) and first.stride == 1


def test_filter_count_by_enumeration(full):
    total = 0
    for layer in full.layers:
        if isinstance(layer, Conv2d):
            total += layer.weight.shape[0]
        elif isinstance(layer, Fire):
            total += sum(c.weight.shape[0] for c in (layer.squeeze, layer.expand1x1, layer.expand3x3))
    assert count_stats(full).total_filters == total


def test_micro_learnables_by_element_count(micro):
    brute = 0
    for layer in micro.iter_layers():
        if isinstance(layer, Conv2d):
            brute += layer.out_channels * layer.in_channels * layer.kernel ** 2 + layer.out_channels
        elif isinstance(layer, BatchNorm2d):
            brute += 2 * layer.channels
        elif isinstance(layer, Linear):
            brute += layer.out_features * (layer.in_features + 1)
    assert count_stats(micro).learnables == brute
    assert micro.embedding_dim() == 125


def test_micro_topology_matches_full(full, micro):
    kinds = [(type(layer).__name__, layer.name) for layer in full.layers]
    assert kinds == [(type(layer).__name__, layer.name) for layer in micro.layers]


def test_micro_rejects_bad_divisor():
    with pytest.raises(ValueError):
        micro_schedule(3)


def test_micro_rejects_too_narrow(monkeypatch):
    from squeezeprune.model import zoo

    sched = zoo.load_schedule("full")
    sched["layers"][0]["filters"] = 9
    monkeypatch.setattr(zoo, "load_schedule", lambda name="full": sched)
    with pytest.raises(ValueError, match="< 2"):
        micro_schedule(8)


def test_num_classes_lower_bound():
    with pytest.raises(ValueError):
        build_micro_config(1)


def test_single_conv_stats_example():
    rng = np.random.default_rng(0)
    model = ModelGraph([Conv2d("conv1", 3, 4, 3, pad=1, rng=rng), BatchNorm2d("bn1", 4), ReLU("r", "conv1"),
                        GlobalAvgPool("gap"), Linear("fc", 4, 2, rng)], input_size=8)
    model.validate()
    stats = count_stats(model)
    assert stats.total_filters == 4
    # 4*3*9 weights + 4 biases + 2*4 BN scalars
    assert learnables_excluding_classifier(model) == 120
    assert stats.embedding_dim == 4


def test_forward_reaches_classifier(micro):
    x = np.zeros((1, 3, 113, 113), dtype=np.float32)
    emb, logits = micro.forward(x, return_embedding=True)
    assert logits.shape == (1, 20) and emb.shape == (1, 125)


def test_validator_reports_bad_edge():
    rng = np.random.default_rng(0)
    model = ModelGraph([Conv2d("conv1", 3, 4, 3, rng=rng), BatchNorm2d("bn1", 4), ReLU("r", "conv1"),
                        Conv2d("conv2", 5, 4, 1, rng=rng), BatchNorm2d("bn2", 4), ReLU("r2", "conv2"),
                        GlobalAvgPool("gap"), Linear("fc", 4, 2, rng)], input_size=8)
    with pytest.raises(ChannelError, match="conv1.*conv2"):
        model.validate()


def test_checkpoint_round_trip(tmp_path, rng):
    model = tiny_fire_net(rng, dtype=np.float32)
    x = rng.normal(size=(2, 3, 9, 9)).astype(np.float32)
    path = tmp_path / "m.sqzp"
    size = save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert model.forward(x).data.tobytes() == loaded.forward(x).data.tobytes()
    assert count_stats(loaded) == count_stats(model)
    stored = sum(t.size for t in model.param_tensors()) + sum(b.size for _, b in model.buffers())
    assert size == path.stat().st_size == ckpt.header_size(model) + 4 * stored
    sidecar = json.loads((tmp_path / "m.sqzp.json").read_text())
    assert sidecar


def test_model_bytes_accounting(micro):
    stats = count_stats(micro)
    assert stats.model_bytes == ckpt.header_size(micro) + 4 * stats.learnables


def _corrupt(data: bytes, offset: int, value: bytes) -> bytes:
    return data[:offset] + value + data[offset + len(value):]


def test_checkpoint_errors_are_distinct(tmp_path, rng):
    model = tiny_fire_net(rng, dtype=np.float32)
    data = ckpt.to_bytes(model)
    with pytest.raises(BadMagicError):
        ckpt.from_bytes(b"XXXX" + data[4:])
    with pytest.raises(VersionError):
        ckpt.from_bytes(_corrupt(data, 4, (99).to_bytes(4, "little")))
    with pytest.raises(TruncatedPayloadError):
        ckpt.from_bytes(data[:-3])
    with pytest.raises(CorruptHeaderError):
        ckpt.from_bytes(data[:20])
    # bump the first conv's output-channel attribute so the shape table disagrees with it
    name = b"conv1"
    at = data.index(name) + len(name) + 2 + 4
    with pytest.raises(ShapeTableError):
        ckpt.from_bytes(_corrupt(data, at, (7).to_bytes(4, "little")))
    path = tmp_path / "bad.sqzp"
    path.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(BadMagicError):
        load_checkpoint(path)
