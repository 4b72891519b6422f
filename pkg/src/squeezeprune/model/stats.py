from __future__ import annotations

from dataclasses import asdict, dataclass

from .checkpoint import header_size
from .graph import ModelGraph


@dataclass(frozen=True)
class ModelStats:
    total_filters: int
    learnables: int
    embedding_dim: int
    model_bytes: int

    def as_dict(self) -> dict:
        return asdict(self)


def count_stats(model: ModelGraph) -> ModelStats:
    """Filters, trainable scalars, descriptor length and serialized parameter size.

    ``model_bytes`` is the checkpoint header plus 4 bytes per learnable; BN
    running statistics are stored in checkpoints but are not learnables.
    """
    filters = sum(conv.out_channels for conv in model.convs())
    learnables = sum(t.size for t in model.param_tensors())
    return ModelStats(filters, learnables, model.embedding_dim(), header_size(model) + 4 * learnables)


def learnables_excluding_classifier(model: ModelGraph) -> int:
    head = model.classifier
    return count_stats(model).learnables - head.weight.size - head.bias.size
