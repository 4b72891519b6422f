"""Differentiable ops on NCHW tensors.

Every op computes its forward result eagerly with numpy and, when a tape is
active and an input requires grad, records a closure that maps the output
gradient to input gradients.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import NumericError, Tensor, active_tape

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

CHECK_FINITE = True


def _finite(op: str, arr: np.ndarray) -> np.ndarray:
    if CHECK_FINITE and not np.isfinite(arr).all():
        raise NumericError(f"{op}: non-finite values in output")
    return arr


def _needs_grad(*tensors: Tensor | None) -> bool:
    return active_tape() is not None and any(t is not None and t.requires_grad for t in tensors)


def _emit(op: str, data: np.ndarray, inputs: tuple, backward) -> Tensor:
    out = Tensor(_finite(op, data))
    if _needs_grad(*inputs):
        active_tape().record(op, out, inputs, backward)
    return out


# ---------------------------------------------------------------------------
# elementwise / reductions (small set, used by tests and losses)
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"add: shape mismatch {a.shape} vs {b.shape}")
    return _emit("add", a.data + b.data, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"mul: shape mismatch {a.shape} vs {b.shape}")
    return _emit("mul", a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, factor: float) -> Tensor:
    return _emit("scale", a.data * factor, (a,), lambda g: (g * factor,))


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return _emit("sum", np.asarray(a.data.sum(), dtype=a.dtype).reshape(()), (a,),
                 lambda g: (np.broadcast_to(g, shape).copy(),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _emit("relu", x.data * mask, (x,), lambda g: (g * mask,))


def channel_mask(x: Tensor, keep: np.ndarray) -> Tensor:
    """Multiply channel ``c`` by ``keep[c]`` (0 or 1); used for functional ablation."""
    m = keep.astype(x.dtype).reshape((1, -1) + (1,) * (x.data.ndim - 2))
    return _emit("channel_mask", x.data * m, (x,), lambda g: (g * m,))


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------


def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    n, c = xp.shape[:2]
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
    # (N, C, Ho, Wo, kh, kw) -> (N, C*kh*kw, Ho*Wo)
    return win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * kh * kw, ho * wo)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, pad: int = 0,
           layer: str = "conv") -> Tensor:
    """2-d cross-correlation, NCHW input and [F, C, kH, kW] weights."""
    if x.data.ndim != 4:
        raise ValueError(f"{layer}: expected NCHW input, got shape {x.shape}")
    n, c, h, w = x.shape
    f, wc, kh, kw = weight.shape
    if c != wc:
        raise ValueError(f"{layer}: expected {wc} input channels, got {c}")
    if stride < 1 or pad < 0:
        raise ValueError(f"{layer}: invalid stride={stride} pad={pad}")
    ho = conv_output_size(h, kh, stride, pad)
    wo = conv_output_size(w, kw, stride, pad)
    if ho < 1 or wo < 1:
        raise ValueError(f"{layer}: input {h}x{w} too small for kernel {kh}x{kw}")

    w2 = weight.data.reshape(f, c * kh * kw)
    pointwise = kh == 1 and kw == 1 and stride == 1 and pad == 0
    if pointwise:
        cols = x.data.reshape(n, c, h * w)
    else:
        xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
        cols = _im2col(xp, kh, kw, stride, ho, wo)
    out = np.matmul(w2, cols)
    if bias is not None:
        out += bias.data.reshape(1, f, 1)
    out = out.reshape(n, f, ho, wo)

    def backward(g):
        g2 = g.reshape(n, f, ho * wo)
        gw = np.tensordot(g2, cols, axes=([0, 2], [0, 2])).reshape(weight.shape) if weight.requires_grad else None
        gb = g2.sum(axis=(0, 2)) if bias is not None and bias.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = np.matmul(w2.T, g2)
            if pointwise:
                gx = gcols.reshape(n, c, h, w)
            else:
                gcols = gcols.reshape(n, c, kh, kw, ho, wo)
                gxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=g.dtype)
                for i in range(kh):
                    for j in range(kw):
                        gxp[:, :, i : i + stride * (ho - 1) + 1 : stride,
                            j : j + stride * (wo - 1) + 1 : stride] += gcols[:, :, i, j]
                gx = gxp[:, :, pad : pad + h, pad : pad + w] if pad else gxp
        return (gx, gw, gb) if bias is not None else (gx, gw)

    inputs = (x, weight, bias) if bias is not None else (x, weight)
    return _emit(layer, out, inputs, backward)


# ---------------------------------------------------------------------------
# normalization, pooling, dense
# ---------------------------------------------------------------------------


def batchnorm2d(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray, running_var: np.ndarray,
                train: bool, momentum: float = BN_MOMENTUM, eps: float = BN_EPS, layer: str = "bn") -> Tensor:
    """Per-channel batch normalization.

    In train mode the batch statistics are used and the running buffers are
    updated in place (unbiased variance, as torch does).  In eval mode the
    running buffers are used and left untouched.
    """
    if eps <= 0:
        raise ValueError(f"{layer}: eps must be positive")
    c = x.shape[1]
    if gamma.shape != (c,):
        raise ValueError(f"{layer}: expected {gamma.shape[0]} channels, got {c}")
    bshape = (1, c, 1, 1)
    if train:
        m = x.data.shape[0] * x.data.shape[2] * x.data.shape[3]
        mean = x.data.mean(axis=(0, 2, 3))
        centered = x.data - mean.reshape(bshape)
        var = (centered * centered).mean(axis=(0, 2, 3))
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = centered * inv_std.reshape(bshape)
        unbiased = var * (m / (m - 1)) if m > 1 else var
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        inv_std = 1.0 / np.sqrt(running_var.astype(x.dtype) + eps)
        xhat = (x.data - running_mean.astype(x.dtype).reshape(bshape)) * inv_std.reshape(bshape)
    inv_std = inv_std.astype(x.dtype, copy=False)
    xhat = xhat.astype(x.dtype, copy=False)
    out = xhat * gamma.data.reshape(bshape) + beta.data.reshape(bshape)

    def backward(g):
        ggamma = (g * xhat).sum(axis=(0, 2, 3)) if gamma.requires_grad else None
        gbeta = g.sum(axis=(0, 2, 3)) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gxhat = g * gamma.data.reshape(bshape)
            if train:
                mean_g = gxhat.mean(axis=(0, 2, 3), keepdims=True)
                mean_gx = (gxhat * xhat).mean(axis=(0, 2, 3), keepdims=True)
                gx = (gxhat - mean_g - xhat * mean_gx) * inv_std.reshape(bshape)
            else:
                gx = gxhat * inv_std.reshape(bshape)
        return gx, ggamma, gbeta

    return _emit(layer, out, (x, gamma, beta), backward)


def maxpool2d(x: Tensor, kernel: int, stride: int, layer: str = "maxpool") -> Tensor:
    """Max pooling without padding; gradient goes to the first maximal element of each window."""
    n, c, h, w = x.shape
    ho = conv_output_size(h, kernel, stride, 0)
    wo = conv_output_size(w, kernel, stride, 0)
    if ho < 1 or wo < 1:
        raise ValueError(f"{layer}: input {h}x{w} too small for kernel {kernel}")

    def window(arr, i, j):
        return arr[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]

    offsets = [divmod(idx, kernel) for idx in range(kernel * kernel)]
    out = window(x.data, 0, 0).copy()
    for i, j in offsets[1:]:
        np.maximum(out, window(x.data, i, j), out=out)

    def backward(g):
        gx = np.zeros_like(x.data)
        taken = np.zeros(out.shape, dtype=bool)
        for i, j in offsets:
            hit = window(x.data, i, j) == out
            hit &= ~taken
            taken |= hit
            window(gx, i, j)[...] += g * hit
        return (gx,)

    return _emit(layer, out, (x,), backward)


def global_avg_pool(x: Tensor, layer: str = "gap") -> Tensor:
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3))

    def backward(g):
        return (np.broadcast_to((g / (h * w)).reshape(n, c, 1, 1), x.shape).astype(x.dtype),)

    return _emit(layer, out, (x,), backward)


def concat_channels(xs: list[Tensor], layer: str = "concat") -> Tensor:
    """Channel concatenation; block order follows the order of ``xs``."""
    ref = xs[0].shape
    for t in xs[1:]:
        if t.shape[0] != ref[0] or t.shape[2:] != ref[2:]:
            raise ValueError(f"{layer}: N/H/W mismatch {ref} vs {t.shape}")
    out = np.concatenate([t.data for t in xs], axis=1)
    bounds = np.cumsum([0] + [t.shape[1] for t in xs])

    def backward(g):
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(xs)))

    return _emit(layer, out, tuple(xs), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None, layer: str = "fc") -> Tensor:
    """``x @ weight.T + bias`` with weight shaped [out, in]."""
    if x.shape[1] != weight.shape[1]:
        raise ValueError(f"{layer}: expected {weight.shape[1]} input features, got {x.shape[1]}")
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def backward(g):
        gx = g @ weight.data if x.requires_grad else None
        gw = g.T @ x.data if weight.requires_grad else None
        if bias is None:
            return gx, gw
        return gx, gw, (g.sum(axis=0) if bias.requires_grad else None)

    inputs = (x, weight, bias) if bias is not None else (x, weight)
    return _emit(layer, out, inputs, backward)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under softmax(logits)."""
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"label out of range [0, {k})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    logp = z[np.arange(n), labels] - logsum
    loss = np.asarray(-logp.mean(), dtype=logits.dtype).reshape(())

    def backward(g):
        p = np.exp(z - logsum[:, None])
        p[np.arange(n), labels] -= 1.0
        return ((p * (g / n)).astype(logits.dtype),)

    return _emit("softmax_cross_entropy", loss, (logits,), backward)
