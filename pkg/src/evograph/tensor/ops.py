"""Builtin implementations: forward values and vector-Jacobian products.

Each primitive ``_f(*values, **static)`` returns ``(out, vjp)``. The public
``IMPLS`` table adapts them to the builtin signatures; arguments may be plain
arrays or :class:`~evograph.tensor.autodiff.Var`.

Conventions: reductions use population statistics (ddof=0); kinks (abs, relu,
clamp and min/max boundaries) get subgradient 0 at the exact boundary;
comparisons, ``sign`` and the ``*_like`` constructors are constant.
"""
from __future__ import annotations

import numpy as np

from .. import _kernels
from .autodiff import apply

# --- arithmetic ------------------------------------------------------------


def _add(a, b):
    return a + b, lambda g: (g, g)


def _sub(a, b):
    return a - b, lambda g: (g, -g)


def _mul(a, b):
    return a * b, lambda g: (g * b, g * a)


def _div(a, b):
    out = a / b
    return out, lambda g: (g / b, -g * out / b)


def _pow(a, b):
    out = np.power(a, b)

    def vjp(g):
        ga = g * b * np.power(a, b - 1)
        safe = np.where(a > 0, a, 1)
        gb = np.where(a > 0, g * out * np.log(safe), 0)
        return ga, gb
    return out, vjp


def _cmp(op):
    fn = {"<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal,
          "==": np.equal, "!=": np.not_equal}[op]

    def prim(a, b):
        dtype = np.result_type(a, b)
        return fn(a, b).astype(dtype), lambda g: (None, None)
    return prim


def _neg(x):
    return -x, lambda g: (-g,)


BINARY = {"+": _add, "-": _sub, "*": _mul, "/": _div, "**": _pow,
          **{op: _cmp(op) for op in ("<", "<=", ">", ">=", "==", "!=")}}


def binary(op, a, b):
    return apply(BINARY[op], (a, b))


def negate(x):
    return apply(_neg, (x,))


# --- elementwise -----------------------------------------------------------


def _abs(x):
    return np.abs(x), lambda g: (g * np.sign(x),)


def _exp(x):
    out = np.exp(x)
    return out, lambda g: (g * out,)


def _log(x):
    return np.log(x), lambda g: (g / x,)


def _sqrt(x):
    out = np.sqrt(x)
    return out, lambda g: (g * 0.5 / out,)


def _tanh(x):
    out = np.tanh(x)
    return out, lambda g: (g * (1 - out * out),)


def _sigmoid_value(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _sigmoid(x):
    out = _sigmoid_value(x)
    return out, lambda g: (g * out * (1 - out),)


def _relu(x):
    return np.maximum(x, 0), lambda g: (g * (x > 0),)


def _silu(x):
    s = _sigmoid_value(x)
    return x * s, lambda g: (g * (s + x * s * (1 - s)),)


def _sign(x):
    return np.sign(x), lambda g: (None,)


def _ones_like(x):
    return np.ones_like(x), lambda g: (None,)


def _zeros_like(x):
    return np.zeros_like(x), lambda g: (None,)


def _clamp(x, lo, hi):
    out = np.maximum(x, lo)
    inside = x > lo
    if hi is not None:
        out = np.minimum(out, hi)
        inside = inside & (x < hi)
    return out.astype(np.result_type(x), copy=False), lambda g: (g * inside, None, None)


def _where(c, a, b):
    mask = c != 0
    out = np.where(mask, a, b)
    return out, lambda g: (None, g * mask, g * ~mask)


def _min2(a, b):
    pick_a = a <= b
    return np.minimum(a, b), lambda g: (g * pick_a, g * ~pick_a)


def _max2(a, b):
    pick_a = a >= b
    return np.maximum(a, b), lambda g: (g * pick_a, g * ~pick_a)


# --- reductions ------------------------------------------------------------


def _norm_axis(x, axis):
    nd = np.ndim(x)
    if not -nd <= axis < nd:
        raise ValueError(f"axis {axis} out of range for {nd}-d tensor")
    return axis % nd


def _expand(g, axis, shape):
    return np.broadcast_to(np.expand_dims(g, axis), shape)


def _sum(x, axis):
    axis = _norm_axis(x, axis)
    return x.sum(axis=axis), lambda g: (_expand(g, axis, x.shape),)


def _mean(x, axis):
    axis = _norm_axis(x, axis)
    n = x.shape[axis]
    return x.mean(axis=axis), lambda g: (_expand(g, axis, x.shape) / n,)


def _var(x, axis):
    axis = _norm_axis(x, axis)
    n = x.shape[axis]
    centered = x - x.mean(axis=axis, keepdims=True)
    out = (centered * centered).mean(axis=axis)
    return out, lambda g: (_expand(g, axis, x.shape) * 2 * centered / n,)


def _std(x, axis):
    axis = _norm_axis(x, axis)
    n = x.shape[axis]
    centered = x - x.mean(axis=axis, keepdims=True)
    out = np.sqrt((centered * centered).mean(axis=axis))

    def vjp(g):
        denom = np.expand_dims(out, axis) * n
        safe = np.where(denom > 0, denom, 1)
        return (np.where(denom > 0, _expand(g, axis, x.shape) * centered / safe, 0),)
    return out, vjp


def _argreduce(reducer, argfn):
    def prim(x, axis):
        axis = _norm_axis(x, axis)
        idx = np.expand_dims(argfn(x, axis=axis), axis)
        out = np.take_along_axis(x, idx, axis=axis).squeeze(axis)

        def vjp(g):
            gx = np.zeros_like(x)
            np.put_along_axis(gx, idx, np.expand_dims(g, axis), axis=axis)
            return (gx,)
        return out, vjp
    return prim


def _quantile(x, q, axis):
    axis = _norm_axis(x, axis)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile level {q} outside [0, 1]")
    n = x.shape[axis]
    order = np.argsort(x, axis=axis, kind="stable")
    xs = np.take_along_axis(x, order, axis=axis)
    pos = q * (n - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    lo_v = np.take(xs, lo, axis=axis)
    hi_v = np.take(xs, hi, axis=axis)
    out = (lo_v + (hi_v - lo_v) * frac).astype(x.dtype, copy=False)

    def vjp(g):
        w = np.zeros(n, dtype=x.dtype)
        w[lo] += 1 - frac
        w[hi] += frac
        shape = [1] * x.ndim
        shape[axis] = n
        contrib = w.reshape(shape) * np.expand_dims(g, axis)
        gx = np.zeros_like(x)
        np.put_along_axis(gx, order, contrib, axis=axis)
        return (gx,)
    return out, vjp


def _median(x, axis):
    return _quantile(x, 0.5, axis)


# --- structural ------------------------------------------------------------


def _matmul(a, b):
    out = np.matmul(a, b)

    def vjp(g):
        g2 = g
        a2 = a if a.ndim > 1 else a[None, :]
        b2 = b if b.ndim > 1 else b[:, None]
        if b.ndim == 1:
            g2 = np.expand_dims(g2, -1)
        if a.ndim == 1:
            g2 = np.expand_dims(g2, -2)
        ga = np.matmul(g2, np.swapaxes(b2, -1, -2))
        gb = np.matmul(np.swapaxes(a2, -1, -2), g2)
        if a.ndim == 1:
            ga = ga[..., 0, :]
        if b.ndim == 1:
            gb = gb[..., :, 0]
        return ga, gb
    return out, vjp


def _concat(*xs, axis):
    axis = _norm_axis(xs[0], axis)
    out = np.concatenate(xs, axis=axis)
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return out, lambda g: tuple(np.split(g, bounds, axis=axis))


def _slice(x, start, stop, axis):
    axis = _norm_axis(x, axis)
    index = [slice(None)] * x.ndim
    index[axis] = slice(int(start), int(stop))
    index = tuple(index)
    out = x[index]
    if out.shape[axis] == 0:
        raise ValueError(f"empty slice [{start}:{stop}] on axis of length {x.shape[axis]}")

    def vjp(g):
        gx = np.zeros_like(x)
        gx[index] = g
        return (gx,)
    return out, vjp


def _diff(x, axis):
    axis = _norm_axis(x, axis)
    out = np.diff(x, axis=axis)

    def vjp(g):
        n = x.shape[axis]
        gx = np.zeros_like(x)
        hi = [slice(None)] * x.ndim
        lo = [slice(None)] * x.ndim
        hi[axis] = slice(1, n)
        lo[axis] = slice(0, n - 1)
        gx[tuple(hi)] += g
        gx[tuple(lo)] -= g
        return (gx,)
    return out, vjp


def _cumsum(x, axis):
    axis = _norm_axis(x, axis)
    out = np.cumsum(x, axis=axis)
    return out, lambda g: (np.flip(np.cumsum(np.flip(g, axis), axis=axis), axis),)


def _rfft_power(x, axis):
    axis = _norm_axis(x, axis)
    n = x.shape[axis]
    spec = np.fft.rfft(x, axis=axis)
    out = (spec.real ** 2 + spec.imag ** 2).astype(x.dtype)

    def vjp(g):
        c = np.moveaxis(g * np.conj(spec), axis, -1)
        full = np.zeros(c.shape[:-1] + (n,), dtype=c.dtype)
        full[..., : c.shape[-1]] = c
        gx = 2.0 * np.fft.fft(full, axis=-1).real
        return (np.moveaxis(gx, -1, axis).astype(x.dtype),)
    return out, vjp


def _conv1d(x, w, dilation):
    dilation = int(dilation)
    if x.ndim != 2:
        raise ValueError(f"conv1d expects x of shape (n, L), got {x.shape}")
    squeeze = w.ndim == 1
    w2 = w[None, :] if squeeze else w
    if w2.ndim != 2:
        raise ValueError(f"conv1d expects w of shape (k, m) or (m,), got {w.shape}")
    if dilation < 1:
        raise ValueError("conv1d dilation must be >= 1")
    if (w2.shape[1] - 1) * dilation >= x.shape[1]:
        raise ValueError(f"conv1d kernel span exceeds signal length {x.shape[1]}")
    dtype = np.result_type(x, w)
    xd, wd = x.astype(dtype, copy=False), w2.astype(dtype, copy=False)
    out = _kernels.conv1d(xd, wd, dilation)

    def vjp(g):
        g3 = g[:, None, :] if squeeze else g
        gx, gw = _kernels.conv1d_backward(np.asarray(g3, dtype=dtype), xd, wd, dilation)
        return gx, (gw[0] if squeeze else gw)
    return (out[:, 0, :] if squeeze else out), vjp


_UNARY = {"abs": _abs, "exp": _exp, "log": _log, "sqrt": _sqrt, "tanh": _tanh,
          "sigmoid": _sigmoid, "relu": _relu, "silu": _silu, "sign": _sign,
          "ones_like": _ones_like, "zeros_like": _zeros_like}
_REDUCE = {"sum": _sum, "mean": _mean, "var": _var, "std": _std,
           "max": _argreduce(np.max, np.argmax), "min": _argreduce(np.min, np.argmin),
           "median": _median}


def _static_int(v, what):
    if float(v) != int(v):
        raise ValueError(f"{what} must be an integer, got {v}")
    return int(v)


IMPLS = {}
for _n, _f in _UNARY.items():
    IMPLS[_n] = (lambda f: lambda x: apply(f, (x,)))(_f)
for _n, _f in _REDUCE.items():
    IMPLS[_n] = (lambda f: lambda x, axis=-1: apply(f, (x,), axis=_static_int(axis, "axis")))(_f)
IMPLS.update(
    clamp=lambda x, lo, hi=None: apply(lambda x, lo, hi: _clamp(x, lo, hi), (x, lo, hi))
    if hi is not None else apply(lambda x, lo: _clamp_lo(x, lo), (x, lo)),
    where=lambda cond, a, b: apply(_where, (cond, a, b)),
    min2=lambda a, b: apply(_min2, (a, b)),
    max2=lambda a, b: apply(_max2, (a, b)),
    matmul=lambda a, b: apply(_matmul, (a, b)),
    concat=lambda *xs, axis=-1: apply(_concat, tuple(xs), axis=_static_int(axis, "axis")),
    slice=lambda x, start, stop, axis=-1: apply(
        _slice, (x,), start=_static_int(start, "start"), stop=_static_int(stop, "stop"),
        axis=_static_int(axis, "axis")),
    quantile=lambda x, q, axis=-1: apply(_quantile, (x,), q=float(q), axis=_static_int(axis, "axis")),
    diff=lambda x, axis=-1: apply(_diff, (x,), axis=_static_int(axis, "axis")),
    cumsum=lambda x, axis=-1: apply(_cumsum, (x,), axis=_static_int(axis, "axis")),
    rfft_power=lambda x, axis=-1: apply(_rfft_power, (x,), axis=_static_int(axis, "axis")),
    conv1d=lambda x, w, dilation=1: apply(_conv1d, (x, w), dilation=_static_int(dilation, "dilation")),
)


def _clamp_lo(x, lo):
    out, vjp = _clamp(x, lo, None)
    return out, lambda g: vjp(g)[:2]
