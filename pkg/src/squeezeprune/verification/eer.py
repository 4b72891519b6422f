"""Equal error rate from genuine and impostor score lists."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


@dataclass
class EERResult:
    eer: float
    threshold: float
    thresholds: np.ndarray = field(repr=False)
    far: np.ndarray = field(repr=False)
    frr: np.ndarray = field(repr=False)

    def curve_samples(self, n: int = 101) -> dict:
        """Up to ``n`` evenly spaced points of the (threshold, FAR, FRR) curve."""
        idx = np.unique(np.linspace(0, len(self.thresholds) - 1, min(n, len(self.thresholds))).round().astype(int))
        return {"threshold": self.thresholds[idx].tolist(), "far": self.far[idx].tolist(),
                "frr": self.frr[idx].tolist()}


def error_counts(genuine: np.ndarray, impostor: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thresholds (sorted union of scores), impostors >= t and genuines < t at each."""
    thresholds = np.unique(np.concatenate([genuine, impostor]))
    imp = np.sort(impostor)
    gen = np.sort(genuine)
    false_accepts = len(imp) - np.searchsorted(imp, thresholds, side="left")
    false_rejects = np.searchsorted(gen, thresholds, side="left")
    return thresholds, false_accepts, false_rejects


def compute_eer(genuine, impostor) -> EERResult:
    """EER where FAR(t) = FRR(t), linearly interpolated between bracketing thresholds.

    FAR(t) is the fraction of impostor scores >= t and FRR(t) the fraction
    of genuine scores < t, swept over the union of all scores.  The crossing
    is located and interpolated in exact rational arithmetic, so perfectly
    separated scores give exactly 0 and identical lists exactly 0.5.
    """
    genuine = np.asarray(genuine, dtype=np.float64).ravel()
    impostor = np.asarray(impostor, dtype=np.float64).ravel()
    if genuine.size == 0 or impostor.size == 0:
        raise ValueError("EER needs non-empty genuine and impostor score lists")
    if not (np.isfinite(genuine).all() and np.isfinite(impostor).all()):
        raise ValueError("scores must be finite")
    thresholds, fa, fr = error_counts(genuine, impostor)
    ng, ni = genuine.size, impostor.size
    # a reject-everything threshold above all scores guarantees a crossing when the top score is tied
    thresholds = np.append(thresholds, np.inf)
    fa, fr = np.append(fa, 0), np.append(fr, ng)
    # FAR - FRR is non-increasing in t, positive at the lowest threshold and negative at +inf
    diff_num = fa.astype(np.int64) * ng - fr.astype(np.int64) * ni
    j = int(np.argmax(diff_num <= 0))
    far_j, frr_j = Fraction(int(fa[j]), ni), Fraction(int(fr[j]), ng)
    if diff_num[j] == 0:
        eer, thr = far_j, Fraction(thresholds[j])
    else:
        far_i, frr_i = Fraction(int(fa[j - 1]), ni), Fraction(int(fr[j - 1]), ng)
        d_i, d_j = far_i - frr_i, far_j - frr_j
        alpha = d_i / (d_i - d_j)
        eer = far_i + alpha * (far_j - far_i)
        if np.isinf(thresholds[j]):
            thr = Fraction(thresholds[j - 1])
        else:
            thr = Fraction(thresholds[j - 1]) + alpha * (Fraction(thresholds[j]) - Fraction(thresholds[j - 1]))
    return EERResult(float(eer), float(thr), thresholds[:-1], fa[:-1] / ni, fr[:-1] / ng)

