"""Resize / crop / flip / normalize.

Bilinear resize uses corner-aligned sampling: output pixel ``d`` along an
axis of input length ``n_in`` and output length ``n_out`` samples the input
at ``d * (n_in - 1) / (n_out - 1)`` (``0`` when ``n_out == 1``), blending the
two neighbouring input pixels linearly.  Short-side resizing scales the long
side to ``floor(long * short_target / short + 0.5)``.
"""

from __future__ import annotations

import numpy as np

SHORT_SIDE = 129
CROP = 113
MEAN = (0.5, 0.5, 0.5)
STD = (0.5, 0.5, 0.5)


def _axis_weights(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if n_out == 1 or n_in == 1:
        pos = np.zeros(n_out)
    else:
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.floor(pos).astype(np.int64)
    lo = np.minimum(lo, n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    return lo, hi, frac


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize of an HxW or HxWxC image to float32."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[:2]
    if out_h < 1 or out_w < 1:
        raise ValueError(f"invalid output size {out_h}x{out_w}")
    if (h, w) == (out_h, out_w):
        return img.astype(np.float32)
    y0, y1, fy = _axis_weights(h, out_h)
    x0, x1, fx = _axis_weights(w, out_w)
    extra = (1,) * (img.ndim - 2)
    fy = fy.reshape((-1, 1) + extra)
    fx = fx.reshape((1, -1) + extra)
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)


def short_side_size(h: int, w: int, target: int = SHORT_SIDE) -> tuple[int, int]:
    if h < 1 or w < 1:
        raise ValueError(f"degenerate image size {h}x{w}")
    if h <= w:
        return target, int(np.floor(w * target / h + 0.5))
    return int(np.floor(h * target / w + 0.5)), target


def resize_short_side(image: np.ndarray, target: int = SHORT_SIDE) -> np.ndarray:
    h, w = image.shape[:2]
    return resize_bilinear(image, *short_side_size(h, w, target))


def as_rgb(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected HxW or HxWx3 image, got shape {img.shape}")
    if img.dtype == np.uint16:
        img = img.astype(np.float32) * (255.0 / 65535.0)
    return img


def crop(image: np.ndarray, top: int, left: int, size: int = CROP) -> np.ndarray:
    h, w = image.shape[:2]
    if top < 0 or left < 0 or top + size > h or left + size > w:
        raise ValueError(f"crop ({top},{left}) size {size} outside {h}x{w} image")
    return image[top:top + size, left:left + size]


def crop_ranges(h: int, w: int, size: int = CROP) -> tuple[int, int]:
    """Largest valid (top, left) offsets for a ``size`` crop."""
    if h < size or w < size:
        raise ValueError(f"image {h}x{w} smaller than crop {size}")
    return h - size, w - size


def center_offsets(h: int, w: int, size: int = CROP) -> tuple[int, int]:
    max_top, max_left = crop_ranges(h, w, size)
    return max_top // 2, max_left // 2


def hflip(image: np.ndarray) -> np.ndarray:
    return image[:, ::-1]


def augment_train(image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Short side to 129, uniform random 113x113 crop, horizontal flip with p=0.5."""
    img = resize_short_side(as_rgb(image))
    max_top, max_left = crop_ranges(*img.shape[:2])
    top = int(rng.integers(0, max_top + 1))
    left = int(rng.integers(0, max_left + 1))
    out = crop(img, top, left)
    if rng.random() < 0.5:
        out = hflip(out)
    return out


def to_tensor(image: np.ndarray, mean=MEAN, std=STD) -> np.ndarray:
    """HxWx3 in [0, 255] to normalized 3xHxW float32."""
    x = np.asarray(image, dtype=np.float32) / 255.0
    x = (x - np.asarray(mean, dtype=np.float32)) / np.asarray(std, dtype=np.float32)
    return np.ascontiguousarray(x.transpose(2, 0, 1))


def eval_preprocess(image: np.ndarray, mean=MEAN, std=STD) -> np.ndarray:
    """Short side to 129, center 113x113 crop, scale to [0, 1], mean/std normalize."""
    img = resize_short_side(as_rgb(image))
    top, left = center_offsets(*img.shape[:2])
    return to_tensor(crop(img, top, left), mean, std)
