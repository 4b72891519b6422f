"""First-order Taylor importance: per group, the sum over its parameters of (g * w)^2."""

from __future__ import annotations

from collections import Counter
from typing import Mapping, Sequence

import numpy as np

from .groups import FilterGroup

# slot order inside a group; the weight row is summed first, left to right
SCALAR_SLOTS = ("bias", "gamma", "beta")


class ImportanceTable:
    """Running per-group sums of mini-batch scores; averaged once at epoch end."""

    def __init__(self, n_groups: int):
        self.sums = np.zeros(n_groups, dtype=np.float64)
        self.batches = 0
        self.averaged: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.sums)

    def add(self, scores: np.ndarray) -> None:
        if self.averaged is not None:
            raise RuntimeError("importance table already finalized")
        if scores.shape != self.sums.shape:
            raise ValueError(f"expected {self.sums.shape[0]} scores, got {scores.shape}")
        self.sums += scores
        self.batches += 1

    def finalize(self) -> np.ndarray:
        if self.batches == 0:
            raise RuntimeError("no mini-batches were scored")
        self.averaged = self.sums / self.batches
        return self.averaged


def _slot_names(group: FilterGroup) -> dict[str, str]:
    return {"weight": f"{group.layer}.weight", "bias": f"{group.layer}.bias",
            "gamma": f"{group.bn}.gamma", "beta": f"{group.bn}.beta"}


def group_scores(groups: Sequence[FilterGroup], grads: Mapping[str, np.ndarray],
                 params: Mapping[str, np.ndarray]) -> np.ndarray:
    """Per-group ``sum_s (g_s * w_s)^2`` in float64.

    Summation order per group is fixed: the conv weight row in C order
    (sequential), then bias, gamma, beta.
    """
    scores = np.empty(len(groups), dtype=np.float64)
    by_layer: dict[str, list[int]] = {}
    for pos, g in enumerate(groups):
        by_layer.setdefault(g.layer, []).append(pos)
    for layer, positions in by_layer.items():
        names = _slot_names(groups[positions[0]])
        for name in names.values():
            if name not in grads or name not in params:
                raise KeyError(f"missing gradient or parameter {name!r}")
            if np.shape(grads[name]) != np.shape(params[name]):
                raise ValueError(f"{name}: gradient shape {np.shape(grads[name])} "
                                 f"!= parameter shape {np.shape(params[name])}")
        rows = np.array([groups[p].filter_index for p in positions])
        w = params[names["weight"]][rows].astype(np.float64).reshape(len(rows), -1)
        gw = grads[names["weight"]][rows].astype(np.float64).reshape(len(rows), -1)
        prod = gw * w
        acc = np.cumsum(prod * prod, axis=1)[:, -1]
        for slot in SCALAR_SLOTS:
            p = grads[names[slot]][rows].astype(np.float64) * params[names[slot]][rows].astype(np.float64)
            acc = acc + p * p
        scores[positions] = acc
    return scores


def score_batch(table: ImportanceTable, groups: Sequence[FilterGroup], grads: Mapping[str, np.ndarray],
                params: Mapping[str, np.ndarray]) -> ImportanceTable:
    """Add one mini-batch's group scores to ``table``; gradients must precede the optimizer step."""
    table.add(group_scores(groups, grads, params))
    return table


def normalize_per_layer(scores: np.ndarray, groups: Sequence[FilterGroup]) -> np.ndarray:
    """Divide each layer's scores by their L2 norm (off by default)."""
    out = scores.astype(np.float64).copy()
    layers = np.array([g.layer_index for g in groups])
    for li in np.unique(layers):
        sel = layers == li
        norm = np.sqrt(np.sum(out[sel] ** 2))
        if norm > 0:
            out[sel] /= norm
    return out


def select_victims(scores, groups: Sequence[FilterGroup], k: int, floor: int = 1) -> tuple[list[FilterGroup], bool]:
    """The ``k`` lowest-scoring groups, keeping at least ``floor`` filters per layer.

    Ties break on (layer index, filter index).  Returns ``(victims, exhausted)``
    where ``exhausted`` is true if fewer than ``k`` groups were eligible.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if isinstance(scores, ImportanceTable):
        scores = scores.averaged if scores.averaged is not None else scores.finalize()
    scores = np.asarray(scores, dtype=np.float64)
    if len(scores) != len(groups):
        raise ValueError(f"{len(scores)} scores for {len(groups)} groups")
    remaining = Counter(g.layer for g in groups)
    order = sorted(range(len(groups)), key=lambda i: (scores[i], groups[i].layer_index, groups[i].filter_index))
    victims = []
    for i in order:
        if len(victims) == k:
            break
        g = groups[i]
        if remaining[g.layer] - 1 < floor:
            continue
        remaining[g.layer] -= 1
        victims.append(g)
    return victims, len(victims) < k
