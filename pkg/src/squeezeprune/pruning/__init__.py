from .groups import FilterGroup, channel_consumers, group_model, group_scalar_count, unprunable_parameters
from .importance import ImportanceTable, group_scores, normalize_per_layer, score_batch, select_victims
from .oracle import (
    MAX_BRUTE_FORCE_GROUPS,
    OracleTooLargeError,
    bottom_overlap,
    brute_force_importance,
    brute_force_scores,
    dataset_loss,
    spearman,
)
from .session import (
    LOG_FIELDS,
    PruneSchedule,
    SessionResult,
    checkpoint_name,
    prune_session,
    recalibrate_bn,
    scoring_epoch,
)
from .surgery import SurgeryError, ablation_masks, surgery

__all__ = [
    "LOG_FIELDS", "MAX_BRUTE_FORCE_GROUPS", "FilterGroup", "ImportanceTable", "OracleTooLargeError", "PruneSchedule",
    "SessionResult", "SurgeryError", "ablation_masks", "bottom_overlap", "brute_force_importance",
    "brute_force_scores", "channel_consumers", "checkpoint_name", "dataset_loss", "group_model",
    "group_scalar_count", "group_scores", "normalize_per_layer", "prune_session", "recalibrate_bn",
    "score_batch", "scoring_epoch", "select_victims", "spearman", "surgery", "unprunable_parameters",
]
