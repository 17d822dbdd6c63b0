"""Differentiable operations on :class:`Tensor`.

Binary elementwise ops accept operands of identical shape, or one operand that
is a Python number / 0-d tensor (scalar broadcast). Anything wider needs an
explicit :func:`broadcast_to`.

Kinks use the derivative-0 convention: ``relu``/``max_with_zero`` pass no
gradient at exactly 0.
"""

from __future__ import annotations

from numbers import Real
from typing import Sequence

import numpy as np

from ..errors import ContractViolation
from .core import Tensor, as_tensor, make_node


def _scalar_or_same(a: Tensor, b, op: str):
    """Return (b_tensor_or_None, b_value) after checking the broadcast contract."""
    if isinstance(b, Real):
        return None, float(b)
    b = as_tensor(b)
    if b.shape != a.shape and b.ndim != 0 and a.ndim != 0:
        raise ContractViolation(f"{op}: shape mismatch {a.shape} vs {b.shape}")
    return b, b.data


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.asarray(g.sum()).reshape(shape)


def add(a, b) -> Tensor:
    a = as_tensor(a)
    bt, bv = _scalar_or_same(a, b, "add")
    out = a.data + bv
    parents = (a,) if bt is None else (a, bt)

    def backward(g):
        ga = _reduce_to(g, a.shape)
        if bt is None:
            return (ga,)
        return ga, _reduce_to(g, bt.shape)

    return make_node(out, parents, backward, "add")


def sub(a, b) -> Tensor:
    a = as_tensor(a)
    bt, bv = _scalar_or_same(a, b, "sub")
    out = a.data - bv
    parents = (a,) if bt is None else (a, bt)

    def backward(g):
        ga = _reduce_to(g, a.shape)
        if bt is None:
            return (ga,)
        return ga, _reduce_to(-g, bt.shape)

    return make_node(out, parents, backward, "sub")


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    bt, bv = _scalar_or_same(a, b, "mul")
    av = a.data
    out = av * bv
    parents = (a,) if bt is None else (a, bt)

    def backward(g):
        ga = _reduce_to(g * bv, a.shape)
        if bt is None:
            return (ga,)
        return ga, _reduce_to(g * av, bt.shape)

    return make_node(out, parents, backward, "mul")


def div(a, b) -> Tensor:
    a = as_tensor(a)
    bt, bv = _scalar_or_same(a, b, "div")
    av = a.data
    out = av / bv
    parents = (a,) if bt is None else (a, bt)

    def backward(g):
        ga = _reduce_to(g / bv, a.shape)
        if bt is None:
            return (ga,)
        return ga, _reduce_to(-g * av / (bv * bv), bt.shape)

    return make_node(out, parents, backward, "div")


def neg(a: Tensor) -> Tensor:
    a = as_tensor(a)
    return make_node(-a.data, (a,), lambda g: (-g,), "neg")


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return make_node(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def max_with_zero(a: Tensor) -> Tensor:
    """``max(a, 0)``: the hinge of a triplet term."""
    out = relu(a)
    out.op = "max_with_zero"
    return out


def exp(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_node(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise ContractViolation("log: input must be strictly positive")
    av = a.data
    return make_node(np.log(av), (a,), lambda g: (g / av,), "log")


def clamp(a: Tensor, lo: float | None = None, hi: float | None = None) -> Tensor:
    """Clip to [lo, hi]; gradient 1 where lo <= a <= hi, 0 outside."""
    a = as_tensor(a)
    lo_v = -np.inf if lo is None else lo
    hi_v = np.inf if hi is None else hi
    inside = (a.data >= lo_v) & (a.data <= hi_v)
    return make_node(np.clip(a.data, lo_v, hi_v), (a,), lambda g: (g * inside,), "clamp")


def softplus(a: Tensor) -> Tensor:
    """``log(1 + exp(a))`` evaluated without overflow."""
    a = as_tensor(a)
    av = a.data
    out = np.maximum(av, 0.0) + np.log1p(np.exp(-np.abs(av)))
    sig = _sigmoid(av)
    return make_node(out, (a,), lambda g: (g * sig,), "softplus")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return make_node(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def _norm_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)
    kept_shape = tuple(1 if i in axes else n for i, n in enumerate(a.shape))

    def backward(g):
        return (np.broadcast_to(g.reshape(kept_shape), a.shape).copy(),)

    return make_node(np.asarray(out), (a,), backward, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    count = 1
    for ax in axes:
        count *= a.shape[ax]
    out = sum(a, axes, keepdims)
    return mul(out, 1.0 / count) if count != 1 else out


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    out = a.data.reshape(shape)
    return make_node(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = np.ascontiguousarray(a.data.transpose(axes))
    return make_node(out, (a,), lambda g: (np.ascontiguousarray(g.transpose(inverse)),), "transpose")


def swap_last(a: Tensor) -> Tensor:
    """Transpose the two trailing axes (batched matrix transpose)."""
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(a, axes)


def broadcast_to(a: Tensor, shape: Sequence[int]) -> Tensor:
    """Explicit broadcast of size-1 axes (same rank) up to ``shape``."""
    a = as_tensor(a)
    shape = tuple(shape)
    if a.ndim != len(shape) or any(s != t and s != 1 for s, t in zip(a.shape, shape)):
        raise ContractViolation(f"broadcast_to: cannot broadcast {a.shape} to {shape}")
    axes = tuple(i for i, (s, t) in enumerate(zip(a.shape, shape)) if s != t)
    out = np.broadcast_to(a.data, shape).copy()

    def backward(g):
        return (g.sum(axis=axes, keepdims=True) if axes else g,)

    return make_node(out, (a,), backward, "broadcast_to")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over identical leading dims."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or a.ndim != b.ndim or a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise ContractViolation(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    av, bv = a.data, b.data
    out = av @ bv

    def backward(g):
        return g @ np.swapaxes(bv, -1, -2), np.swapaxes(av, -1, -2) @ g

    return make_node(out, (a, b), backward, "matmul")


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(s != r for i, (s, r) in enumerate(zip(t.shape, ref)) if i != ax):
            raise ContractViolation(f"concat: shape mismatch {ref} vs {t.shape} off axis {ax}")
    out = np.concatenate([t.data for t in tensors], axis=ax)
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def backward(g):
        slicer = [slice(None)] * g.ndim
        grads = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            slicer[ax] = slice(lo, hi)
            grads.append(np.ascontiguousarray(g[tuple(slicer)]))
        return grads

    return make_node(out, tensors, backward, "concat")


def _check_nchw(x: Tensor, op: str) -> None:
    if x.ndim != 4:
        raise ContractViolation(f"{op}: expected NCHW input, got shape {x.shape}")


def softmax_channels(x: Tensor) -> Tensor:
    """Softmax over axis 1 of an NCHW tensor with max-subtraction."""
    x = as_tensor(x)
    _check_nchw(x, "softmax_channels")
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return make_node(out, (x,), backward, "softmax_channels")


def log_softmax_channels(x: Tensor) -> Tensor:
    x = as_tensor(x)
    _check_nchw(x, "log_softmax_channels")
    z = x.data - x.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = z - lse
    soft = np.exp(out)

    def backward(g):
        return (g - soft * g.sum(axis=1, keepdims=True),)

    return make_node(out, (x,), backward, "log_softmax_channels")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation (no kernel flip) of NCHW input with OIkk weights."""
    x, weight = as_tensor(x), as_tensor(weight)
    _check_nchw(x, "conv2d")
    if weight.ndim != 4:
        raise ContractViolation(f"conv2d: weight must be [C_out, C_in, k, k], got {weight.shape}")
    n, c_in, h, w = x.shape
    c_out, wc_in, kh, kw = weight.shape
    if wc_in != c_in:
        raise ContractViolation(f"conv2d: input channels C_in={c_in} but weight expects C_in={wc_in}")
    if kh != kw or kh % 2 == 0:
        raise ContractViolation(f"conv2d: kernel must be square with odd size, got {kh}x{kw}")
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise ContractViolation(f"conv2d: bias shape {bias.shape} != (C_out={c_out},)")
    k, s, p = kh, stride, padding
    h_out = (h + 2 * p - k) // s + 1
    w_out = (w + 2 * p - k) // s + 1
    if h_out < 1 or w_out < 1:
        raise ContractViolation(f"conv2d: output size {h_out}x{w_out} from H={h}, W={w}, k={k}, stride={s}, padding={p}")
    parents = (x, weight) if bias is None else (x, weight, bias)
    impl = _conv2d_shifted if s == 1 else _conv2d_im2col
    out, backward = impl(x, weight, bias, k, s, p, h_out, w_out)
    return make_node(out, parents, backward, "conv2d")


def _conv2d_shifted(x, weight, bias, k, s, p, h_out, w_out):
    """Stride-1 path: one matmul per kernel tap over a flattened padded input.

    With the input laid out as (C_in, N*Hp*Wp), the window shifted by tap
    (i, j) is the contiguous column range starting at i*Wp + j. Outputs are
    computed on the padded grid and the valid H_out x W_out corner is kept.
    A trailing all-zero image absorbs the overrun of the last shifts.
    """
    n, c_in, h, w = x.shape
    c_out = weight.shape[0]
    hp, wp = h + 2 * p, w + 2 * p
    span = n * hp * wp
    xp4 = np.zeros((c_in, n + 1, hp, wp))
    xp4[:, :n, p:p + h, p:p + w] = x.data.transpose(1, 0, 2, 3)
    xflat = xp4.reshape(c_in, -1)
    taps = np.ascontiguousarray(weight.data.transpose(2, 3, 0, 1)).reshape(k * k, c_out, c_in)
    acc = np.empty((c_out, span))
    tmp = np.empty((c_out, span))
    for t in range(k * k):
        off = (t // k) * wp + t % k
        if t == 0:
            np.matmul(taps[t], xflat[:, off:off + span], out=acc)
        else:
            np.matmul(taps[t], xflat[:, off:off + span], out=tmp)
            acc += tmp
    out = acc.reshape(c_out, n, hp, wp)[:, :, :h_out, :w_out].transpose(1, 0, 2, 3)
    out = np.ascontiguousarray(out)
    if bias is not None:
        out += bias.data[None, :, None, None]

    def backward(g):
        gf4 = np.zeros((c_out, n, hp, wp))
        gf4[:, :, :h_out, :w_out] = g.transpose(1, 0, 2, 3)
        gflat = gf4.reshape(c_out, span)
        grads = [None, None]
        if x.requires_grad:
            taps_t = np.ascontiguousarray(weight.data.transpose(2, 3, 1, 0)).reshape(k * k, c_in, c_out)
            gxp = np.zeros((c_in, (n + 1) * hp * wp))
            buf = np.empty((c_in, span))
            for t in range(k * k):
                off = (t // k) * wp + t % k
                np.matmul(taps_t[t], gflat, out=buf)
                gxp[:, off:off + span] += buf
            gx = gxp.reshape(c_in, n + 1, hp, wp)[:, :n, p:p + h, p:p + w].transpose(1, 0, 2, 3)
            grads[0] = np.ascontiguousarray(gx)
        if weight.requires_grad:
            gw = np.empty((k * k, c_out, c_in))
            for t in range(k * k):
                off = (t // k) * wp + t % k
                gw[t] = gflat @ xflat[:, off:off + span].T
            grads[1] = np.ascontiguousarray(gw.reshape(k, k, c_out, c_in).transpose(2, 3, 0, 1))
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return out, backward


def _conv2d_im2col(x, weight, bias, k, s, p, h_out, w_out):
    n, c_in, h, w = x.shape
    c_out = weight.shape[0]
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.data
    # cols laid out (C_in, k, k, N, H', W') so the matmul reshape is free
    cols = np.empty((c_in, k, k, n, h_out, w_out))
    for i in range(k):
        for j in range(k):
            window = xp[:, :, i:i + s * (h_out - 1) + 1:s, j:j + s * (w_out - 1) + 1:s]
            cols[:, i, j] = window.transpose(1, 0, 2, 3)
    cols2 = cols.reshape(c_in * k * k, n * h_out * w_out)
    w2 = weight.data.reshape(c_out, c_in * k * k)
    out = (w2 @ cols2).reshape(c_out, n, h_out, w_out)
    if bias is not None:
        out += bias.data[:, None, None, None]
    out = np.ascontiguousarray(out.transpose(1, 0, 2, 3))

    def backward(g):
        g2 = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(c_out, n * h_out * w_out)
        grads = []
        if x.requires_grad:
            gcols = (w2.T @ g2).reshape(c_in, k, k, n, h_out, w_out)
            gxp = np.zeros((n, c_in, h + 2 * p, w + 2 * p))
            for i in range(k):
                for j in range(k):
                    gxp[:, :, i:i + s * (h_out - 1) + 1:s, j:j + s * (w_out - 1) + 1:s] += gcols[:, i, j].transpose(1, 0, 2, 3)
            grads.append(np.ascontiguousarray(gxp[:, :, p:p + h, p:p + w]) if p else gxp)
        else:
            grads.append(None)
        grads.append((g2 @ cols2.T).reshape(weight.shape) if weight.requires_grad else None)
        if bias is not None:
            grads.append(g2.sum(axis=1))
        return grads

    return out, backward


def max_pool2d(x: Tensor) -> Tensor:
    """2x2 max pooling, stride 2; ties route the gradient to the first maximum."""
    x = as_tensor(x)
    _check_nchw(x, "max_pool2d")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ContractViolation(f"max_pool2d: H={h}, W={w} must be even")
    blocks = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        gb = np.zeros((n, c, h // 2, w // 2, 4))
        np.put_along_axis(gb, idx[..., None], g[..., None], axis=-1)
        gx = gb.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
        return (gx,)

    return make_node(out, (x,), backward, "max_pool2d")


def avg_pool2d(x: Tensor, factor: int = 2) -> Tensor:
    x = as_tensor(x)
    _check_nchw(x, "avg_pool2d")
    n, c, h, w = x.shape
    f = factor
    if h % f or w % f:
        raise ContractViolation(f"avg_pool2d: H={h}, W={w} not divisible by {f}")
    out = x.data.reshape(n, c, h // f, f, w // f, f).mean(axis=(3, 5))

    def backward(g):
        gx = np.broadcast_to(g[:, :, :, None, :, None] / (f * f), (n, c, h // f, f, w // f, f))
        return (gx.reshape(n, c, h, w),)

    return make_node(out, (x,), backward, "avg_pool2d")


def upsample_nearest2d(x: Tensor, factor: int = 2) -> Tensor:
    x = as_tensor(x)
    _check_nchw(x, "upsample_nearest2d")
    n, c, h, w = x.shape
    f = factor
    out = np.broadcast_to(x.data[:, :, :, None, :, None], (n, c, h, f, w, f)).reshape(n, c, h * f, w * f)

    def backward(g):
        return (g.reshape(n, c, h, f, w, f).sum(axis=(3, 5)),)

    return make_node(out, (x,), backward, "upsample_nearest2d")


def unfold_patches(x: Tensor, size: int = 3) -> Tensor:
    """All ``size``x``size`` valid neighborhoods: [N,C,H,W] -> [N,C,size*size,L].

    Row ``r`` of the R = size*size axis holds the pixel at offset
    ``(r // size, r % size)`` of each window; L enumerates window positions.
    """
    x = as_tensor(x)
    _check_nchw(x, "unfold_patches")
    n, c, h, w = x.shape
    hh, ww = h - size + 1, w - size + 1
    if hh < 1 or ww < 1:
        raise ContractViolation(f"unfold_patches: {h}x{w} is smaller than the {size}x{size} neighborhood")
    out = np.empty((n, c, size * size, hh * ww))
    for i in range(size):
        for j in range(size):
            out[:, :, i * size + j] = x.data[:, :, i:i + hh, j:j + ww].reshape(n, c, hh * ww)

    def backward(g):
        gx = np.zeros((n, c, h, w))
        for i in range(size):
            for j in range(size):
                gx[:, :, i:i + hh, j:j + ww] += g[:, :, i * size + j].reshape(n, c, hh, ww)
        return (gx,)

    return make_node(out, (x,), backward, "unfold_patches")
