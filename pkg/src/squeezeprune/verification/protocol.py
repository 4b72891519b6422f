"""Same-pose / cross-pose genuine and impostor score generation."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from ..data.manifest import POSES
from .descriptors import Template

POSE_PAIRS: tuple[tuple[str, str], ...] = tuple((a, a) for a in POSES) + (
    (POSES[0], POSES[1]), (POSES[0], POSES[2]), (POSES[1], POSES[2]))
DEFAULT_WINDOW = 100


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def cosine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise :func:`cosine` of two equally shaped matrices."""
    na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
    if (na == 0).any() or (nb == 0).any():
        raise ValueError("cosine similarity is undefined for a zero vector")
    return np.clip(np.einsum("ij,ij->i", a, b) / (na * nb), -1.0, 1.0)


@dataclass
class ScorePair:
    identity_a: str
    identity_b: str
    template_a: int
    template_b: int


@dataclass
class ScoreSet:
    pose_a: str
    pose_b: str
    genuine: np.ndarray
    impostor: np.ndarray
    genuine_pairs: list[ScorePair] = field(default_factory=list, repr=False)
    impostor_pairs: list[ScorePair] = field(default_factory=list, repr=False)

    @property
    def mode(self) -> str:
        return "same" if self.pose_a == self.pose_b else "cross"

    @property
    def counts(self) -> tuple[int, int]:
        return len(self.genuine), len(self.impostor)

    @staticmethod
    def pooled(sets: Sequence["ScoreSet"]) -> "ScoreSet":
        return ScoreSet("all", "all", np.concatenate([s.genuine for s in sets]),
                        np.concatenate([s.impostor for s in sets]))


def index_templates(templates: Sequence[Template]) -> tuple[list[str], dict[tuple[str, str], list[Template]]]:
    """Identity order (first appearance) and templates keyed by (identity, pose)."""
    order: list[str] = []
    seen: set[str] = set()
    table: dict[tuple[str, str], list[Template]] = {}
    for t in templates:
        if t.identity not in seen:
            seen.add(t.identity)
            order.append(t.identity)
        table.setdefault((t.identity, t.pose), []).append(t)
    return order, table


def genuine_index_pairs(n_templates: int, same_pose: bool) -> list[tuple[int, int]]:
    if same_pose:
        return list(combinations(range(n_templates), 2))
    return [(i, j) for i in range(n_templates) for j in range(n_templates)]


def protocol_scores(templates: Sequence[Template], mode: str, pose_pair: tuple[str, str],
                    window: int = DEFAULT_WINDOW) -> ScoreSet:
    """Score one pose pair.

    Genuine: every unordered template pair of an identity (same pose) or
    every pose-a x pose-b pair (cross pose).  Impostor: each identity's
    first pose-a template against the second pose-b template of the next
    ``window`` identities, wrapping around the identity list.
    """
    pose_a, pose_b = pose_pair
    if mode not in ("same", "cross"):
        raise ValueError(f"mode must be 'same' or 'cross', got {mode!r}")
    if (mode == "same") != (pose_a == pose_b):
        raise ValueError(f"mode {mode!r} does not match pose pair {pose_pair}")
    order, table = index_templates(templates)
    n = len(order)
    if window < 1 or n < window + 1:
        raise ValueError(f"impostor window {window} needs at least {window + 1} identities, have {n}; "
                         "shrink the window in the configuration")
    for ident in order:
        for pose in (pose_a, pose_b):
            if len(table.get((ident, pose), [])) < 2:
                raise ValueError(f"identity {ident!r} needs at least 2 templates for pose {pose!r}")

    left, right, gpairs = [], [], []
    for ident in order:
        ta, tb = table[(ident, pose_a)], table[(ident, pose_b)]
        if len(ta) != len(tb):
            raise ValueError(f"identity {ident!r}: unequal template counts across poses")
        for i, j in genuine_index_pairs(len(ta), mode == "same"):
            left.append(ta[i].vector)
            right.append(tb[j].vector)
            gpairs.append(ScorePair(ident, ident, i, j))
    genuine = cosine_rows(np.array(left), np.array(right))

    left, right, ipairs = [], [], []
    for k, ident in enumerate(order):
        enrol = table[(ident, pose_a)][0]
        for offset in range(1, window + 1):
            other = order[(k + offset) % n]
            left.append(enrol.vector)
            right.append(table[(other, pose_b)][1].vector)
            ipairs.append(ScorePair(ident, other, 0, 1))
    impostor = cosine_rows(np.array(left), np.array(right))
    return ScoreSet(pose_a, pose_b, genuine, impostor, gpairs, ipairs)


def expected_counts(n_identities: int, templates_per_pose: int, window: int, same_pose: bool) -> tuple[int, int]:
    t = templates_per_pose
    per_id = t * (t - 1) // 2 if same_pose else t * t
    return n_identities * per_id, n_identities * window
