from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from ..data.dataset import ImageSet
from ..data.manifest import DataError


def validation_count(n_images: int, val_fraction: float) -> int:
    """``ceil(val_fraction * n)`` with a minimum of one image."""
    return max(1, math.ceil(round(val_fraction * n_images, 9)))


def split_train_val(dataset: ImageSet, val_fraction: float, seed: int,
                    min_images_per_class: int = 1) -> tuple[ImageSet, ImageSet]:
    """Per-class split into disjoint train / validation sets.

    Classes with fewer than ``min_images_per_class`` images are dropped and
    the remaining classes relabelled ``0..K-1`` in their original order.
    """
    by_class: dict[int, list[int]] = defaultdict(list)
    for i, label in enumerate(dataset.labels):
        by_class[int(label)].append(i)
    kept = [c for c in range(dataset.num_classes) if len(by_class[c]) >= min_images_per_class]
    if not kept:
        raise DataError(f"no class has at least {min_images_per_class} images")

    rng = np.random.default_rng(seed)
    train_idx, val_idx, labels_train, labels_val = [], [], [], []
    for new_label, c in enumerate(kept):
        members = by_class[c]
        if len(members) < 2:
            raise DataError(f"class {dataset.classes[c]!r} has {len(members)} image(s); "
                            "cannot fill both train and validation")
        n_val = validation_count(len(members), val_fraction)
        if n_val >= len(members):
            n_val = len(members) - 1
        perm = rng.permutation(len(members))
        chosen = sorted(members[j] for j in perm[:n_val])
        rest = sorted(members[j] for j in perm[n_val:])
        val_idx += chosen
        train_idx += rest
        labels_val += [new_label] * len(chosen)
        labels_train += [new_label] * len(rest)

    classes = [dataset.classes[c] for c in kept]
    train = dataset.subset(train_idx)
    val = dataset.subset(val_idx)
    train.labels = np.array(labels_train, dtype=np.int64)
    val.labels = np.array(labels_val, dtype=np.int64)
    train.classes = val.classes = classes
    return train, val
