"""Binary checkpoint format (little-endian).

Layout::

    b"SQZP"  u32 version  u32 layer_count
    per layer:
        u16 name_len, name (UTF-8)
        u8  kind tag
        u8  attr_count, attr_count x i32
        u8  tensor_count, per tensor: u8 rank, rank x u32 dims
    float32 payloads of every tensor, in declaration order

Layer 0 is a pseudo ``input`` layer whose name is the config name and whose
attributes are ``[in_channels, input_size]``.  Per-layer tensor order is the
layer's parameters followed by its BN buffers.  A JSON sidecar
(``<path>.json``) mirrors the topology for inspection; it is never read back.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .graph import ModelGraph
from .layers import BatchNorm2d, Conv2d, Fire, FireSpec, GlobalAvgPool, Layer, Linear, MaxPool2d, ReLU

MAGIC = b"SQZP"
VERSION = 1

KIND_TAGS = {"input": 0, "conv": 1, "bn": 2, "relu": 3, "maxpool": 4, "fire": 5, "gap": 6, "fc": 7}
TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}


class CheckpointError(Exception):
    code = "checkpoint_error"


class BadMagicError(CheckpointError):
    code = "bad_magic"


class VersionError(CheckpointError):
    code = "bad_version"


class CorruptHeaderError(CheckpointError):
    code = "corrupt_header"


class ShapeTableError(CheckpointError):
    code = "shape_mismatch"


class TruncatedPayloadError(CheckpointError):
    code = "truncated"


def _layer_tensors(layer: Layer) -> list[np.ndarray]:
    return [t.data for _, t in layer.parameters()] + [b for _, b in layer.buffers()]


def _encode_header(model: ModelGraph) -> tuple[bytes, list[np.ndarray]]:
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<II", VERSION, len(model.layers) + 1))
    entries = [(model.config_name, "input", [model.in_channels, model.input_size], [])]
    entries += [(layer.name, layer.kind, layer.attributes(), _layer_tensors(layer)) for layer in model.layers]
    payload = []
    for name, kind, attrs, tensors in entries:
        raw = name.encode("utf-8")
        out.write(struct.pack("<H", len(raw)))
        out.write(raw)
        out.write(struct.pack("<BB", KIND_TAGS[kind], len(attrs)))
        out.write(struct.pack(f"<{len(attrs)}i", *attrs))
        out.write(struct.pack("<B", len(tensors)))
        for t in tensors:
            out.write(struct.pack("<B", t.ndim))
            out.write(struct.pack(f"<{t.ndim}I", *t.shape))
        payload.extend(tensors)
    return out.getvalue(), payload


def header_size(model: ModelGraph) -> int:
    return len(_encode_header(model)[0])


def to_bytes(model: ModelGraph) -> bytes:
    header, tensors = _encode_header(model)
    body = b"".join(np.ascontiguousarray(t, dtype="<f4").tobytes() for t in tensors)
    return header + body


def topology(model: ModelGraph) -> dict:
    layers = [{"name": layer.name, "kind": layer.kind, "attributes": layer.attributes(),
               "tensors": {n: list(t.shape) for n, t in layer.parameters()} | {n: list(b.shape) for n, b in layer.buffers()}}
              for layer in model.layers]
    return {"format": "SQZP", "version": VERSION, "config": model.config_name,
            "in_channels": model.in_channels, "input_size": model.input_size, "layers": layers}


def save_checkpoint(model: ModelGraph, path) -> int:
    """Write ``path`` and its JSON sidecar; returns the checkpoint size in bytes."""
    path = Path(path)
    data = to_bytes(model)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    Path(str(path) + ".json").write_text(json.dumps(topology(model), indent=1))
    return len(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise CorruptHeaderError(f"header ends unexpectedly at byte {self.pos}")
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals

    def take_bytes(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptHeaderError(f"header ends unexpectedly at byte {self.pos}")
        raw = self.data[self.pos:self.pos + n]
        self.pos += n
        return raw


def _make_layer(name: str, kind: str, attrs: list[int]) -> Layer:
    try:
        if kind == "conv":
            in_c, out_c, k, stride, pad = attrs
            return Conv2d(name, in_c, out_c, k, stride, pad)
        if kind == "bn":
            (c,) = attrs
            return BatchNorm2d(name, c)
        if kind == "relu":
            return ReLU(name)
        if kind == "maxpool":
            k, stride = attrs
            return MaxPool2d(name, k, stride)
        if kind == "fire":
            in_c, s, e1, e3 = attrs
            return Fire(name, in_c, FireSpec(s, e1, e3))
        if kind == "gap":
            return GlobalAvgPool(name)
        if kind == "fc":
            in_f, out_f = attrs
            return Linear(name, in_f, out_f)
    except (ValueError, TypeError) as exc:
        raise CorruptHeaderError(f"layer {name!r}: bad attributes {attrs}: {exc}") from exc
    raise CorruptHeaderError(f"layer {name!r}: unknown kind {kind!r}")


def from_bytes(data: bytes) -> ModelGraph:
    if data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    r = _Reader(data)
    r.pos = 4
    version, count = r.take("<II")
    if version != VERSION:
        raise VersionError(f"unsupported checkpoint version {version}")
    entries = []
    for _ in range(count):
        (nlen,) = r.take("<H")
        try:
            name = r.take_bytes(nlen).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptHeaderError("layer name is not valid UTF-8") from exc
        tag, nattr = r.take("<BB")
        if tag not in TAG_KINDS:
            raise CorruptHeaderError(f"layer {name!r}: unknown kind tag {tag}")
        attrs = list(r.take(f"<{nattr}i"))
        (ntensor,) = r.take("<B")
        shapes = []
        for _ in range(ntensor):
            (rank,) = r.take("<B")
            shapes.append(tuple(r.take(f"<{rank}I")))
        entries.append((name, TAG_KINDS[tag], attrs, shapes))

    if not entries or entries[0][1] != "input" or len(entries[0][2]) != 2:
        raise CorruptHeaderError("first layer must be the input descriptor")
    config_name, _, (in_channels, input_size), _ = entries[0]

    layers = []
    for name, kind, attrs, shapes in entries[1:]:
        layer = _make_layer(name, kind, attrs)
        expected = [t.shape for t in _layer_tensors(layer)]
        if [tuple(s) for s in expected] != shapes:
            raise ShapeTableError(f"layer {name!r}: shape table {shapes} does not match attributes {expected}")
        layers.append(layer)

    total = sum(int(np.prod(s)) for _, _, _, shapes in entries for s in shapes)
    if len(data) - r.pos < 4 * total:
        raise TruncatedPayloadError(f"payload has {len(data) - r.pos} bytes, expected {4 * total}")
    if len(data) - r.pos > 4 * total:
        raise CorruptHeaderError(f"{len(data) - r.pos - 4 * total} trailing bytes after payload")

    pos = r.pos
    for layer in layers:
        targets = [t for _, t in layer.parameters()]
        for t in targets:
            n = t.data.size
            t.data = np.frombuffer(data, "<f4", n, pos).astype(np.float32).reshape(t.shape)
            pos += 4 * n
        for attr_owner, attr in _buffer_slots(layer):
            cur = getattr(attr_owner, attr)
            n = cur.size
            setattr(attr_owner, attr, np.frombuffer(data, "<f4", n, pos).astype(np.float32).reshape(cur.shape))
            pos += 4 * n

    # the ReLU after conv -> BN gates that conv's filters
    for i, layer in enumerate(layers):
        if isinstance(layer, ReLU) and i >= 2 and isinstance(layers[i - 2], Conv2d):
            layer.source = layers[i - 2].name
    return ModelGraph(layers, in_channels, input_size, config_name)


def _buffer_slots(layer: Layer):
    owners = layer.sublayers() if isinstance(layer, Fire) else [layer]
    for owner in owners:
        if isinstance(owner, BatchNorm2d):
            yield owner, "running_mean"
            yield owner, "running_var"


def load_checkpoint(path) -> ModelGraph:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    model = from_bytes(data)
    model.validate()
    return model
