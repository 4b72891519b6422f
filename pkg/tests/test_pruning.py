import numpy as np
import pytest

from squeezeprune.autodiff import Tape, softmax_cross_entropy
from squeezeprune.data import ImageSet
from squeezeprune.model import BatchNorm2d, Conv2d, GlobalAvgPool, Linear, ModelGraph, ReLU, count_stats
from squeezeprune.pruning import (
    ImportanceTable,
    OracleTooLargeError,
    PruneSchedule,
    SurgeryError,
    ablation_masks,
    brute_force_importance,
    dataset_loss,
    group_model,
    group_scalar_count,
    prune_session,
    score_batch,
    scoring_epoch,
    select_victims,
    surgery,
    unprunable_parameters,
)
from squeezeprune.pruning.groups import FilterGroup
from squeezeprune.training import TrainConfig

from conftest import tiny_fire_net


def single_conv_net(filters=8, rng=None):
    rng = rng or np.random.default_rng(0)
    model = ModelGraph([Conv2d("conv1", 3, filters, 3, pad=1, rng=rng), BatchNorm2d("bn1", filters),
                        ReLU("conv1_relu", "conv1"), GlobalAvgPool("gap"), Linear("fc", filters, 2, rng)],
                       input_size=8)
    model.validate()
    return model


def toy_imageset(n_per_class=8, classes=3, size=129, seed=0):
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for c in range(classes):
        base = rng.integers(0, 256, size=(size, size, 3))
        for _ in range(n_per_class):
            noise = rng.integers(-20, 21, size=base.shape)
            images.append(np.clip(base + noise, 0, 255).astype(np.uint8))
            labels.append(c)
    n = len(images)
    names = [f"c{c}" for c in range(classes)]
    return ImageSet(images, np.array(labels), [names[y] for y in labels], ["frontal"] * n,
                    [f"img{i}.ppm" for i in range(n)], names)


# ---------------------------------------------------------------- groups


def test_single_conv_groups():
    model = single_conv_net(8)
    groups = group_model(model)
    assert len(groups) == 8
    for g in groups:
        assert group_scalar_count(model, g) - 2 == 27 + 1 + 2  # running stats are the extra 2
        assert g.consumers == [("fc", g.filter_index)]
    assert unprunable_parameters(model) == ["fc.weight", "fc.bias"]


def test_squeeze_groups_feed_both_expands(rng):
    model = tiny_fire_net(rng, fires=((4, 3, 5),))
    for g in group_model(model):
        if g.layer == "fire2.squeeze":
            assert g.consumers == [("fire2.expand1x1", g.filter_index), ("fire2.expand3x3", g.filter_index)]
        if g.layer == "fire2.expand3x3":
            assert g.consumers == [("conv10", 3 + g.filter_index)]


def test_grouped_scalar_accounting(rng):
    model = tiny_fire_net(rng)
    groups = group_model(model)
    grouped = sum(group_scalar_count(model, g) for g in groups)
    head = model.classifier
    running = sum(b.size for _, b in model.buffers())
    assert grouped + head.weight.size + head.bias.size == count_stats(model).learnables + running


# ---------------------------------------------------------------- scores


def _one_filter_group():
    g = FilterGroup(0, "c", 0, 0, "b")
    grads = {"c.weight": np.array([[1.0, 2.0]]), "c.bias": np.zeros(1), "b.gamma": np.zeros(1),
             "b.beta": np.zeros(1)}
    params = {"c.weight": np.array([[3.0, 4.0]]), "c.bias": np.ones(1), "b.gamma": np.ones(1),
              "b.beta": np.ones(1)}
    return g, grads, params


def test_score_example_73():
    g, grads, params = _one_filter_group()
    table = score_batch(ImportanceTable(1), [g], grads, params)
    assert table.sums[0] == 73.0


def test_zero_gradient_scores_zero():
    g, grads, params = _one_filter_group()
    grads = {k: np.zeros_like(v) for k, v in grads.items()}
    assert score_batch(ImportanceTable(1), [g], grads, params).sums[0] == 0.0


def test_scale_covariance():
    g, grads, params = _one_filter_group()
    base = score_batch(ImportanceTable(1), [g], grads, params).sums[0]
    params = {k: v * 2 for k, v in params.items()}
    grads = {k: v / 2 for k, v in grads.items()}
    assert score_batch(ImportanceTable(1), [g], grads, params).sums[0] == base


def test_shape_mismatch_raises():
    g, grads, params = _one_filter_group()
    grads["c.weight"] = np.zeros((1, 3))
    with pytest.raises(ValueError):
        score_batch(ImportanceTable(1), [g], grads, params)


def test_table_average():
    table = ImportanceTable(2)
    table.add(np.array([1.0, 2.0]))
    table.add(np.array([3.0, 6.0]))
    np.testing.assert_array_equal(table.finalize(), [2.0, 4.0])
    assert table.batches == 2


# ---------------------------------------------------------------- victims


def _groups(layout):
    """layout: filters per layer."""
    out = []
    for li, n in enumerate(layout):
        for f in range(n):
            out.append(FilterGroup(len(out), f"l{li}", li, f, f"b{li}"))
    return out


def test_select_lowest():
    victims, exhausted = select_victims(np.array([5.0, 1.0, 3.0]), _groups([3]), 1)
    assert [v.group_id for v in victims] == [1] and not exhausted


def test_select_ties_by_index():
    victims, _ = select_victims(np.zeros(6), _groups([3, 3]), 2)
    assert [v.key for v in victims] == [(0, 0), (0, 1)]


def test_select_respects_floor():
    groups = _groups([1, 3])
    victims, _ = select_victims(np.array([0.0, 1.0, 2.0, 3.0]), groups, 1, floor=1)
    assert victims[0].layer == "l1"


def test_select_exhaustion_flag():
    victims, exhausted = select_victims(np.zeros(3), _groups([2, 1]), 3)
    assert len(victims) == 1 and exhausted


# ---------------------------------------------------------------- surgery


def test_surgery_removes_k_filters(rng):
    model = tiny_fire_net(rng)
    groups = group_model(model)
    victims = [groups[i] for i in (0, 7, 9, 20)]
    pruned = surgery(model, victims)
    assert count_stats(pruned).total_filters == count_stats(model).total_filters - 4
    assert count_stats(model).total_filters == sum(c.out_channels for c in model.convs())


def test_expand1x1_removal_shifts_concat_indices(rng):
    model = tiny_fire_net(rng, fires=((3, 4, 4),))
    groups = group_model(model)
    victim = next(g for g in groups if g.layer == "fire2.expand1x1" and g.filter_index == 1)
    pruned = surgery(model, [victim])
    # index-tracking oracle: post-concat channel c survives at c' = c - (number of removed channels < c)
    kept = [c for c in range(8) if c != 1]
    w_old = model.layers[-5].weight.data
    np.testing.assert_array_equal(pruned.layers[-5].weight.data, w_old[:, kept])
    for g in group_model(pruned):
        if g.layer == "fire2.expand3x3":
            assert g.consumers == [("conv10", 3 + g.filter_index)]


def test_surgery_is_transactional(rng):
    model = tiny_fire_net(rng)
    before = [t.data.copy() for t in model.param_tensors()]
    bad = FilterGroup(0, "conv1", 0, 99, "bn1", consumers=[])
    with pytest.raises(SurgeryError):
        surgery(model, [bad])
    for t, b in zip(model.param_tensors(), before):
        np.testing.assert_array_equal(t.data, b)


def test_embedding_shrinks_only_for_last_conv(rng):
    model = tiny_fire_net(rng)
    groups = group_model(model)
    assert surgery(model, [groups[0]]).embedding_dim() == model.embedding_dim()
    last = [g for g in groups if g.layer == "conv10"][0]
    assert surgery(model, [last]).embedding_dim() == model.embedding_dim() - 1


# ---------------------------------------------------------------- oracle


def test_zero_downstream_weights_give_zero_score(rng):
    model = tiny_fire_net(rng)
    x = rng.normal(size=(4, 3, 9, 9))
    y = np.array([0, 1, 2, 0])
    groups = group_model(model)
    g = next(g for g in groups if g.layer == "conv10" and g.filter_index == 2)
    model.classifier.weight.data[:, 2] = 0.0
    assert brute_force_importance(model, g, x, y) == 0.0


def test_redundant_twin_filter():
    """Two identical filters; after folding one's combiner weight into its twin, ablating it costs nothing."""
    rng = np.random.default_rng(7)
    model = single_conv_net(4, rng)
    conv, fc = model.layers[0], model.classifier
    conv.weight.data[1] = conv.weight.data[0]
    conv.bias.data[1] = conv.bias.data[0]
    x = rng.normal(size=(6, 3, 8, 8)).astype(np.float32)
    y = rng.integers(0, 2, 6)
    base = dataset_loss(model, x, y)
    fc.weight.data[:, 0] += fc.weight.data[:, 1]
    fc.weight.data[:, 1] = 0.0
    assert dataset_loss(model, x, y) == pytest.approx(base, abs=1e-6)
    g = group_model(model)[1]
    assert brute_force_importance(model, g, x, y) == pytest.approx(0.0, abs=1e-12)


def test_oracle_refuses_large_models(rng):
    model = tiny_fire_net(rng)
    with pytest.raises(OracleTooLargeError, match="sampled"):
        brute_force_importance(model, group_model(model)[0], np.zeros((1, 3, 9, 9)), np.zeros(1, int),
                               max_groups=5)


def test_ablation_masks_zero_channel(rng):
    model = tiny_fire_net(rng)
    g = group_model(model)[3]
    masks = ablation_masks(model, [g])
    assert masks["conv1"].sum() == model.layers[0].out_channels - 1


# ---------------------------------------------------------------- scoring epoch and session


@pytest.fixture(scope="module")
def toy_data():
    return toy_imageset(n_per_class=8, classes=3)


def test_scoring_epoch_counts_batches(toy_data):
    model = tiny_fire_net(np.random.default_rng(0), dtype=np.float32)
    sched = PruneSchedule(batch_size=8)
    table, loss = scoring_epoch(model, toy_data, sched, np.random.default_rng(0))
    assert table.batches == 3 and np.isfinite(loss)
    np.testing.assert_allclose(table.averaged, table.sums / 3)
    assert (table.averaged >= 0).all()


def test_scoring_with_zero_lr_keeps_weights(toy_data):
    model = tiny_fire_net(np.random.default_rng(0), dtype=np.float32)
    before = [t.data.copy() for t in model.param_tensors()]
    table, _ = scoring_epoch(model, toy_data, PruneSchedule(batch_size=8, scoring_lr=0.0), np.random.default_rng(0))
    assert table.sums.sum() > 0
    for t, b in zip(model.param_tensors(), before):
        np.testing.assert_array_equal(t.data, b)


def test_scoring_rejects_empty_subset(toy_data):
    model = tiny_fire_net(np.random.default_rng(0), dtype=np.float32)
    with pytest.raises(ValueError):
        scoring_epoch(model, toy_data.subset([]), PruneSchedule(), np.random.default_rng(0))


def test_schedule_validation_and_rules():
    with pytest.raises(ValueError):
        PruneSchedule(step_fraction=0)
    with pytest.raises(ValueError):
        PruneSchedule(subset_fraction=1.5)
    s = PruneSchedule()
    assert [i for i in range(1, 17) if s.retrains_at(i)] == [1, 6, 11, 16]
    assert s.victims_per_iteration(493) == 5
    assert s.victims_per_iteration(50) == 1
    assert PruneSchedule(step_fraction=0.05).victims_per_iteration(50) == 3  # 2.5 rounds half up


def _session(tmp_path, data, iterations, seed=0, retrain=True):
    model = tiny_fire_net(np.random.default_rng(0), fires=((4, 8, 8), (4, 8, 8)), embed=20, dtype=np.float32)
    sched = PruneSchedule(step_fraction=0.02, max_total_fraction=0.02 * iterations, batch_size=8,
                          subset_fraction=0.5)
    cfg = TrainConfig(batch_size=8, max_epochs=1, val_fraction=0.1, min_images_per_class=2) if retrain else None
    return prune_session(model, data, data.subset(range(0, len(data), 4)), sched, cfg, out_dir=tmp_path, seed=seed)


def test_session_linear_decay_and_determinism(tmp_path, toy_data):
    a = _session(tmp_path / "a", toy_data, 10)
    b = _session(tmp_path / "b", toy_data, 10)
    filters = [r["filters"] for r in a.rows]
    k = filters[0] - filters[1]
    assert filters == [filters[0] - k * i for i in range(11)]
    assert [r["retrained"] for r in a.rows[1:]] == [1, 0, 0, 0, 0, 1, 0, 0, 0, 0]
    assert (tmp_path / "a" / "prune_log.csv").read_bytes() == (tmp_path / "b" / "prune_log.csv").read_bytes()
    assert a.victims == b.victims
    for i in range(11):
        name = f"iter_{i:03d}.sqzp"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_session_resumes(tmp_path, toy_data):
    full = _session(tmp_path / "full", toy_data, 4, retrain=False)
    _session(tmp_path / "part", toy_data, 2, retrain=False)
    resumed = _session(tmp_path / "part", toy_data, 4, retrain=False)
    assert [r["filters"] for r in resumed.rows] == [r["filters"] for r in full.rows]
    assert (tmp_path / "part" / "iter_004.sqzp").read_bytes() == (tmp_path / "full" / "iter_004.sqzp").read_bytes()


def test_scores_use_pre_step_gradients(toy_data):
    """Scores in a scoring epoch equal those computed from the gradients before each update."""
    model = tiny_fire_net(np.random.default_rng(0), dtype=np.float32)
    twin = model.copy()
    sched = PruneSchedule(batch_size=24, scoring_lr=0.5)
    table, _ = scoring_epoch(model, toy_data, sched, np.random.default_rng(3))
    from squeezeprune.training import iterate_batches
    x, y = next(iterate_batches(toy_data, 24, np.random.default_rng(3)))
    named = twin.named_params()
    with Tape() as tape:
        loss = softmax_cross_entropy(twin.forward(x, train=True), y)
    tape.backward(loss)
    ref = score_batch(ImportanceTable(len(table)), group_model(twin), {n: t.grad for n, t in named.items()},
                      {n: t.data for n, t in named.items()})
    np.testing.assert_array_equal(table.sums, ref.sums)
