"""End-to-end verification run: descriptors, templates, scores, EERs, exports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data.dataset import ImageSet
from ..model.graph import ModelGraph
from ..training.trainer import eval_tensors
from .descriptors import Descriptor, build_templates, extract_descriptor, extract_descriptors
from .eer import EERResult, compute_eer
from .protocol import DEFAULT_WINDOW, POSE_PAIRS, ScoreSet, protocol_scores

SCORE_FIELDS = ["pair_type", "pose_a", "pose_b", "id_a", "id_b", "score", "label"]


@dataclass
class VerificationReport:
    per_template: int
    window: int
    score_sets: list[ScoreSet] = field(repr=False)
    pair_eers: list[EERResult] = field(repr=False)
    pooled: EERResult = field(repr=False)

    @property
    def pooled_eer(self) -> float:
        return self.pooled.eer

    @property
    def mean_eer(self) -> float:
        return float(np.mean([r.eer for r in self.pair_eers]))

    def eer_by_pair(self) -> dict[str, float]:
        return {f"{s.pose_a}-{s.pose_b}": r.eer for s, r in zip(self.score_sets, self.pair_eers)}

    def as_dict(self, curve_points: int = 101) -> dict:
        pairs = []
        for s, r in zip(self.score_sets, self.pair_eers):
            pairs.append({"pose_a": s.pose_a, "pose_b": s.pose_b, "mode": s.mode, "genuine": len(s.genuine),
                          "impostor": len(s.impostor), "eer": r.eer, "threshold": r.threshold,
                          "curve": r.curve_samples(curve_points)})
        return {"per_template": self.per_template, "impostor_window": self.window, "pairs": pairs,
                "pooled": {"eer": self.pooled.eer, "threshold": self.pooled.threshold,
                           "curve": self.pooled.curve_samples(curve_points)},
                "mean_of_pair_eers": self.mean_eer}


def describe_imageset(model: ModelGraph, data: ImageSet, batched: bool = False) -> list[Descriptor]:
    """Descriptors for every image of ``data`` in dataset order."""
    x = eval_tensors(data)
    if batched:
        return extract_descriptors(model, x, data.paths, data.identities, data.poses)
    return [extract_descriptor(model, x[i], data.paths[i], data.identities[i], data.poses[i])
            for i in range(len(x))]


def verify(descriptors: list[Descriptor], per_template: int, images_per_pose: int = 10,
           window: int = DEFAULT_WINDOW) -> VerificationReport:
    templates = build_templates(descriptors, per_template, images_per_pose)
    sets = [protocol_scores(templates, "same" if a == b else "cross", (a, b), window) for a, b in POSE_PAIRS]
    pooled = ScoreSet.pooled(sets)
    return VerificationReport(per_template, window, sets, [compute_eer(s.genuine, s.impostor) for s in sets],
                              compute_eer(pooled.genuine, pooled.impostor))


def write_scores_csv(path, report: VerificationReport) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCORE_FIELDS)
        for s in report.score_sets:
            for label, scores, pairs in ((1, s.genuine, s.genuine_pairs), (0, s.impostor, s.impostor_pairs)):
                for score, p in zip(scores, pairs):
                    writer.writerow([s.mode, s.pose_a, s.pose_b, p.identity_a, p.identity_b, repr(float(score)),
                                     label])


def write_eer_json(path, report: VerificationReport, extra: dict | None = None) -> None:
    payload = report.as_dict()
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
