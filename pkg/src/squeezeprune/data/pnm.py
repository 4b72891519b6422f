"""Binary PPM (P6) / PGM (P5) codec."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class ImageDecodeError(ValueError):
    pass


def _tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` whitespace-separated header integers, skipping comments."""
    out, pos, n = [], 2, len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ImageDecodeError("malformed PNM header")
        out.append(int(data[start:pos]))
    # exactly one whitespace byte separates the header from the raster
    return out, pos + 1


def decode_pnm(data: bytes) -> np.ndarray:
    """Decode P5/P6 bytes to ``HxW`` (gray) or ``HxWx3`` (color) uint8/uint16."""
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageDecodeError(f"unsupported PNM magic {magic!r}")
    (width, height, maxval), pos = _tokens(data, 3)
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ImageDecodeError(f"bad PNM dimensions {width}x{height} maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    need = width * height * channels * dtype.itemsize
    raster = data[pos:pos + need]
    if len(raster) < need:
        raise ImageDecodeError(f"PNM raster truncated: {len(raster)} of {need} bytes")
    arr = np.frombuffer(raster, dtype=dtype).reshape((height, width, channels) if channels == 3 else (height, width))
    if maxval > 255:
        return arr.astype(np.uint16)
    return arr.copy()


def encode_pnm(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ValueError(f"expected uint8 image, got {image.dtype}")
    if image.ndim == 2:
        magic = b"P5"
    elif image.ndim == 3 and image.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot encode image of shape {image.shape}")
    h, w = image.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode() + np.ascontiguousarray(image).tobytes()


def read_image(path) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageDecodeError(f"{path}: {exc}") from exc
    try:
        return decode_pnm(data)
    except ImageDecodeError as exc:
        raise ImageDecodeError(f"{path}: {exc}") from exc


def write_image(path, image: np.ndarray) -> None:
    Path(path).write_bytes(encode_pnm(image))
