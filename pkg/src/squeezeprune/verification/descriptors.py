"""Flip-averaged GAP descriptors and enrolment templates."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..autodiff import NumericError
from ..model.graph import ModelGraph

TEMPLATE_SIZES = (1, 5)


@dataclass
class Descriptor:
    vector: np.ndarray
    image_id: str = ""
    identity: str = ""
    pose: str = ""
    flip_averaged: bool = True


@dataclass
class Template:
    identity: str
    pose: str
    members: tuple[str, ...]
    vector: np.ndarray = field(repr=False)


def l2_normalize(v: np.ndarray, what: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if not np.isfinite(norm):
        raise NumericError(f"{what} has non-finite entries")
    if norm == 0.0:
        raise NumericError(f"{what} is all zeros and cannot be normalized")
    return v / norm


def _flip_average(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise NumericError(f"{what}: non-finite activations in the embedding")
    return l2_normalize((a.astype(np.float64) + b.astype(np.float64)) / 2, what)


def extract_descriptor(model: ModelGraph, image: np.ndarray, image_id: str = "", identity: str = "",
                       pose: str = "") -> Descriptor:
    """L2-normalized mean of the embeddings of ``image`` (3xHxW) and its mirror.

    Each view goes through its own single-image forward pass, so the result
    is exactly the same for an image and its mirror.
    """
    if image.ndim != 3:
        raise ValueError(f"expected a 3xHxW tensor, got shape {image.shape}")
    a = model.embed(image[None])[0]
    b = model.embed(image[None, :, :, ::-1])[0]
    return Descriptor(_flip_average(a, b, image_id or "descriptor"), image_id, identity, pose)


def extract_descriptors(model: ModelGraph, images: np.ndarray, image_ids: Sequence[str] = (),
                        identities: Sequence[str] = (), poses: Sequence[str] = (),
                        batch_size: int = 64) -> list[Descriptor]:
    """Batched version of :func:`extract_descriptor` for an Nx3xHxW stack.

    Faster, but mirror symmetry then holds only up to float rounding since
    BLAS results can depend on batch composition.
    """
    n = len(images)
    ids = list(image_ids) or [str(i) for i in range(n)]
    idents = list(identities) or [""] * n
    ps = list(poses) or [""] * n
    out = []
    for start in range(0, n, batch_size):
        xb = images[start:start + batch_size]
        a = model.embed(xb)
        b = model.embed(np.ascontiguousarray(xb[:, :, :, ::-1]))
        for j in range(len(xb)):
            i = start + j
            out.append(Descriptor(_flip_average(a[j], b[j], ids[i]), ids[i], idents[i], ps[i]))
    return out


def build_templates(descriptors: Sequence[Descriptor], per_template: int,
                    images_per_pose: int = 10) -> list[Template]:
    """Group descriptors by (identity, pose) in input order and average consecutive runs.

    ``per_template=5`` with 10 images yields images 0-4 and 5-9 as the two
    templates; ``per_template=1`` makes every image its own template.
    """
    if per_template not in TEMPLATE_SIZES:
        raise ValueError(f"per_template must be one of {TEMPLATE_SIZES}, got {per_template}")
    if images_per_pose % per_template:
        raise ValueError(f"{images_per_pose} images per pose cannot be split into templates of {per_template}")
    groups: OrderedDict[tuple[str, str], list[Descriptor]] = OrderedDict()
    for d in descriptors:
        groups.setdefault((d.identity, d.pose), []).append(d)
    templates = []
    for (identity, pose), ds in groups.items():
        if len(ds) != images_per_pose:
            raise ValueError(f"identity {identity!r} pose {pose!r}: expected {images_per_pose} images, "
                             f"got {len(ds)}")
        for start in range(0, images_per_pose, per_template):
            members = ds[start:start + per_template]
            mean = np.mean([m.vector for m in members], axis=0)
            templates.append(Template(identity, pose, tuple(m.image_id for m in members),
                                      l2_normalize(mean, f"template {identity}/{pose}")))
    return templates
