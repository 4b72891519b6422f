from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifest import DataError, Manifest
from .pnm import ImageDecodeError, read_image


@dataclass
class ImageSet:
    """Decoded images held in memory with integer class labels."""

    images: list[np.ndarray]
    labels: np.ndarray
    identities: list[str]
    poses: list[str]
    paths: list[str]
    classes: list[str]

    def __len__(self) -> int:
        return len(self.images)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def subset(self, indices) -> "ImageSet":
        idx = [int(i) for i in indices]
        return ImageSet([self.images[i] for i in idx], self.labels[idx], [self.identities[i] for i in idx],
                        [self.poses[i] for i in idx], [self.paths[i] for i in idx], self.classes)


def load_imageset(manifest: Manifest, split: str) -> ImageSet:
    rows = manifest.select(split)
    if not rows:
        raise DataError(f"manifest has no {split!r} rows")
    classes = manifest.identities(split)
    index = {c: i for i, c in enumerate(classes)}
    images = []
    for row in rows:
        try:
            images.append(read_image(manifest.resolve(row)))
        except ImageDecodeError as exc:
            raise DataError(str(exc)) from exc
    return ImageSet(images, np.array([index[r.identity] for r in rows], dtype=np.int64),
                    [r.identity for r in rows], [r.pose for r in rows], [r.path for r in rows], classes)
