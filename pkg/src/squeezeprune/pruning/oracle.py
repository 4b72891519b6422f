"""Brute-force induced error: squared loss change when a group's channel is ablated."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..autodiff import softmax_cross_entropy
from ..model.graph import ModelGraph
from .groups import FilterGroup, group_model
from .surgery import ablation_masks

MAX_BRUTE_FORCE_GROUPS = 300


class OracleTooLargeError(ValueError):
    pass


def dataset_loss(model: ModelGraph, x: np.ndarray, y: np.ndarray, ablate: dict | None = None,
                 batch_size: int = 64) -> float:
    """Mean cross-entropy over ``(x, y)`` in eval mode."""
    total = 0.0
    for start in range(0, len(x), batch_size):
        xb, yb = x[start:start + batch_size], y[start:start + batch_size]
        logits = model.forward(xb, train=False, ablate=ablate)
        total += float(softmax_cross_entropy(logits, yb).data) * len(xb)
    return total / len(x)


def _check_size(model: ModelGraph, max_groups: int) -> None:
    n = sum(c.out_channels for c in model.convs())
    if n > max_groups:
        raise OracleTooLargeError(f"model has {n} filter groups (ceiling {max_groups}); brute-force ablation is "
                                  "too expensive, evaluate a sampled subset of groups instead")


def brute_force_importance(model: ModelGraph, group: FilterGroup, x: np.ndarray, y: np.ndarray,
                           max_groups: int = MAX_BRUTE_FORCE_GROUPS, base_loss: float | None = None) -> float:
    """``(E(D, W) - E(D, W | group removed))^2`` with the group's channel forced to zero."""
    _check_size(model, max_groups)
    if base_loss is None:
        base_loss = dataset_loss(model, x, y)
    ablated = dataset_loss(model, x, y, ablate=ablation_masks(model, [group]))
    return (base_loss - ablated) ** 2


def brute_force_scores(model: ModelGraph, x: np.ndarray, y: np.ndarray,
                       groups: Sequence[FilterGroup] | None = None,
                       max_groups: int = MAX_BRUTE_FORCE_GROUPS) -> np.ndarray:
    """Induced error of every group (one ablated forward sweep per group)."""
    _check_size(model, max_groups)
    groups = group_model(model) if groups is None else groups
    base = dataset_loss(model, x, y)
    return np.array([brute_force_importance(model, g, x, y, max_groups, base) for g in groups])


def spearman(a: np.ndarray, b: np.ndarray) -> float:
    from scipy.stats import spearmanr

    return float(spearmanr(a, b).statistic)


def bottom_overlap(a: np.ndarray, b: np.ndarray, fraction: float = 0.1) -> float:
    """Fraction of shared members between the lowest-``fraction`` index sets of ``a`` and ``b``."""
    n = max(1, int(round(fraction * len(a))))
    sa = set(np.argsort(a, kind="stable")[:n].tolist())
    sb = set(np.argsort(b, kind="stable")[:n].tolist())
    return len(sa & sb) / n
