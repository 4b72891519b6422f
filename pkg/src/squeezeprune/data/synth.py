"""Synthetic identities for desk-scale experiments.

Each identity is a colored texture built from a few sinusoidal gratings
drawn from an identity-keyed RNG.  Pose tags apply a fixed geometric family
on top: ``frontal`` none, ``threequarter`` a moderate shear with horizontal
foreshortening, ``profile`` a strong shear plus a flat occluding band on one
side.  Every image adds small translation/rotation/scale jitter, a global
brightness change and pixel noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .manifest import POSES, Manifest, ManifestRow, write_manifest
from .pnm import write_image

# pose -> (shear, horizontal scale, occluded width fraction)
POSE_GEOMETRY = {
    "frontal": (0.0, 1.0, 0.0),
    "threequarter": (0.25, 0.85, 0.0),
    "profile": (0.5, 0.7, 0.3),
}


@dataclass(frozen=True)
class SynthConfig:
    n_components: int = 3
    freq_range: tuple[float, float] = (0.03, 0.11)
    amplitude: float = 38.0
    noise_sigma: float = 14.0
    jitter_px: float = 4.0
    jitter_deg: float = 6.0
    jitter_scale: float = 0.06
    brightness: float = 12.0


def _identity_pattern(seed: int, index: int, cfg: SynthConfig) -> dict:
    rng = np.random.default_rng([seed, 1, index])
    k = cfg.n_components
    colors = rng.normal(size=(k, 3))
    colors /= np.linalg.norm(colors, axis=1, keepdims=True)
    return {
        "freq": rng.uniform(*cfg.freq_range, size=k),
        "angle": rng.uniform(0.0, np.pi, size=k),
        "phase": rng.uniform(0.0, 2 * np.pi, size=k),
        "color": colors,
        "base": rng.uniform(80.0, 175.0, size=3),
        "side": int(rng.integers(0, 2)),
    }


def render_image(pattern: dict, pose: str, size: int, rng: np.random.Generator,
                 cfg: SynthConfig = SynthConfig()) -> np.ndarray:
    shear, hscale, occl = POSE_GEOMETRY[pose]
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    yy -= c + rng.uniform(-cfg.jitter_px, cfg.jitter_px)
    xx -= c + rng.uniform(-cfg.jitter_px, cfg.jitter_px)
    theta = np.deg2rad(rng.normal(0.0, cfg.jitter_deg / 2))
    s = 1.0 + rng.uniform(-cfg.jitter_scale, cfg.jitter_scale)
    u = (np.cos(theta) * xx - np.sin(theta) * yy) / s
    v = (np.sin(theta) * xx + np.cos(theta) * yy) / s
    u = u / hscale + shear * v

    img = np.broadcast_to(pattern["base"] + rng.normal(0.0, cfg.brightness), (size, size, 3)).copy()
    for f, a, p, col in zip(pattern["freq"], pattern["angle"], pattern["phase"], pattern["color"]):
        wave = np.sin(2 * np.pi * f * (np.cos(a) * u + np.sin(a) * v) + p)
        img += cfg.amplitude * wave[:, :, None] * col[None, None, :]
    if occl > 0:
        width = int(round(occl * size))
        band = slice(0, width) if pattern["side"] == 0 else slice(size - width, size)
        img[:, band] = 128.0
    img += rng.normal(0.0, cfg.noise_sigma, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def synthesize_dataset(n_identities: int, n_per_pose: int, image_size: int = 129, seed: int = 0,
                       out_dir=None, n_test_identities: int | None = None,
                       cfg: SynthConfig = SynthConfig()) -> Manifest:
    """Write ``n_identities * 3 * n_per_pose`` PPM images plus ``manifest.csv``.

    The first ``n_identities - n_test_identities`` identities form the train
    split, the rest the test split (default: half each).
    """
    if n_identities < 2 or n_per_pose < 1:
        raise ValueError("need n_identities >= 2 and n_per_pose >= 1")
    if out_dir is None:
        raise ValueError("out_dir is required")
    n_test = n_identities // 2 if n_test_identities is None else n_test_identities
    if not 0 <= n_test <= n_identities:
        raise ValueError(f"n_test_identities={n_test} out of range")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset directory {out}: {exc}") from exc

    rows = []
    for i in range(n_identities):
        split = "train" if i < n_identities - n_test else "test"
        ident = f"id{i:04d}"
        pattern = _identity_pattern(seed, i, cfg)
        (out / split / ident).mkdir(parents=True, exist_ok=True)
        for p_idx, pose in enumerate(POSES):
            for j in range(n_per_pose):
                rng = np.random.default_rng([seed, 2, i, p_idx, j])
                rel = f"{split}/{ident}/{pose}_{j:02d}.ppm"
                write_image(out / rel, render_image(pattern, pose, image_size, rng, cfg))
                rows.append(ManifestRow(rel, ident, pose, split))
    write_manifest(out / "manifest.csv", rows)
    return Manifest(rows, out)
