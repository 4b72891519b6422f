import numpy as np
import pytest

from squeezeprune.autodiff import NumericError
from squeezeprune.data import DataError
from squeezeprune.data.dataset import ImageSet
from squeezeprune.training import PlateauSchedule, TrainConfig, split_train_val, train, validation_count

from conftest import tiny_fire_net


def make_imageset(n_classes, per_class, size=20, seed=0):
    rng = np.random.default_rng(seed)
    images, labels, ids = [], [], []
    for c in range(n_classes):
        for _ in range(per_class):
            images.append(rng.integers(0, 256, (size, size, 3), dtype=np.uint8))
            labels.append(c)
            ids.append(f"id{c}")
    n = len(images)
    return ImageSet(images, np.array(labels), ids, ["frontal"] * n, [f"{i}.ppm" for i in range(n)],
                    [f"id{c}" for c in range(n_classes)])


def test_plateau_example_drops_after_third_epoch():
    sched = PlateauSchedule(0.01, [0.005, 0.001], patience=2, min_delta=0.01)
    actions = [sched.step(v) for v in [1.0, 0.99, 0.989, 0.9889]]
    assert actions == [None, None, "drop", None]
    assert sched.lr == 0.005


def test_plateau_rates_never_increase_and_stop():
    rng = np.random.default_rng(0)
    sched = PlateauSchedule(0.01, [0.005, 0.001, 0.0001], patience=2, min_delta=1e-3)
    rates = []
    for loss in rng.uniform(0.5, 1.5, 200):
        rates.append(sched.lr)
        if sched.step(loss) == "stop":
            break
    assert sched.finished
    assert all(b <= a for a, b in zip(rates, rates[1:]))
    assert set(rates) <= {0.01, 0.005, 0.001, 0.0001}


def test_ladder_must_decrease():
    with pytest.raises(ValueError):
        TrainConfig(lr_ladder=[0.02])


@pytest.mark.parametrize("n,frac,expect", [(100, 0.02, 2), (70, 0.02, 2), (10, 0.02, 1), (600, 0.1, 60)])
def test_validation_count(n, frac, expect):
    assert validation_count(n, frac) == expect


def test_split_is_disjoint_and_complete():
    data = make_imageset(4, 12)
    tr, va = split_train_val(data, 0.1, seed=3, min_images_per_class=10)
    train_paths, val_paths = set(tr.paths), set(va.paths)
    assert not train_paths & val_paths
    assert train_paths | val_paths == set(data.paths)
    assert len(va) == 4 * validation_count(12, 0.1)
    again = split_train_val(data, 0.1, seed=3, min_images_per_class=10)
    assert again[1].paths == va.paths


def test_split_drops_small_classes_and_relabels():
    data = make_imageset(3, 12)
    keep = [i for i, label in enumerate(data.labels) if label != 1 or i % 12 < 5]
    tr, va = split_train_val(data.subset(keep), 0.1, seed=0, min_images_per_class=10)
    assert tr.classes == ["id0", "id2"]
    assert set(tr.labels) == set(va.labels) == {0, 1}


def test_split_with_no_eligible_class():
    with pytest.raises(DataError):
        split_train_val(make_imageset(2, 3), 0.1, seed=0, min_images_per_class=10)


def test_train_records_history(rng):
    data = make_imageset(3, 6)
    tr, va = split_train_val(data, 0.2, seed=0, min_images_per_class=2)
    model = tiny_fire_net(rng, num_classes=3, dtype=np.float32)
    cfg = TrainConfig(batch_size=4, max_epochs=2, val_fraction=0.2, min_images_per_class=2)
    hist = train(model, tr, va, cfg)
    assert [r["epoch"] for r in hist.rows] == [1, 2]
    assert all(np.isfinite(r["val_loss"]) for r in hist.rows)


def test_train_aborts_on_non_finite(rng):
    data = make_imageset(3, 6)
    tr, va = split_train_val(data, 0.2, seed=0, min_images_per_class=2)
    model = tiny_fire_net(rng, num_classes=3, dtype=np.float32)
    model.param_tensors()[0].data[...] = np.nan
    cfg = TrainConfig(batch_size=4, max_epochs=2, val_fraction=0.2, min_images_per_class=2)
    with pytest.raises(NumericError, match="epoch 1 iteration 1.*lr=0.01"):
        train(model, tr, va, cfg)
