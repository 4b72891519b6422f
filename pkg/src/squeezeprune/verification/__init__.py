from .descriptors import Descriptor, Template, build_templates, extract_descriptor, extract_descriptors, l2_normalize
from .eer import EERResult, compute_eer, error_counts
from .evaluate import VerificationReport, describe_imageset, verify, write_eer_json, write_scores_csv
from .protocol import (
    DEFAULT_WINDOW,
    POSE_PAIRS,
    ScorePair,
    ScoreSet,
    cosine,
    cosine_rows,
    expected_counts,
    genuine_index_pairs,
    protocol_scores,
)

__all__ = [
    "DEFAULT_WINDOW", "Descriptor", "EERResult", "POSE_PAIRS", "ScorePair", "ScoreSet", "Template",
    "VerificationReport", "build_templates", "compute_eer", "cosine", "cosine_rows", "describe_imageset", "error_counts",
    "expected_counts", "extract_descriptor", "extract_descriptors", "genuine_index_pairs", "l2_normalize",
    "protocol_scores", "verify", "write_eer_json", "write_scores_csv",
]
