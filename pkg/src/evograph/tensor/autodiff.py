"""Minimal reverse-mode differentiation over numpy arrays.

A :class:`Var` wraps a value together with the vector-Jacobian product that
maps the gradient of its value back onto its parents. Plain arrays flowing
through the same ops are treated as constants, so the interpreter runs one
code path whether or not gradients are being recorded.
"""
from __future__ import annotations

import itertools

import numpy as np

_counter = itertools.count()


class Var:
    __slots__ = ("value", "parents", "vjp", "order", "name")

    def __init__(self, value, parents=(), vjp=None, name=None):
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.order = next(_counter)
        self.name = name

    @property
    def shape(self):
        return np.shape(self.value)

    def __repr__(self):
        return f"Var({self.name or ''}shape={self.shape})"


def value_of(x):
    return x.value if isinstance(x, Var) else x


def unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    g = np.asarray(g)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g.reshape(shape)


def apply(fn, tensors: tuple, **static):
    """Run ``fn(*values, **static) -> (value, vjp)`` and record it if needed.

    ``vjp(g)`` returns one gradient (or None) per tensor argument.
    """
    values = tuple(value_of(t) for t in tensors)
    out, vjp = fn(*values, **static)
    if any(isinstance(t, Var) for t in tensors):
        return Var(out, tuple(tensors), vjp)
    return out


def backward(root: Var, seed=None) -> dict:
    """Accumulate d(root)/d(v) for every Var reachable from ``root``.

    Returns a mapping ``id(var) -> gradient``; look up leaves with
    :func:`grad_of`.
    """
    if not isinstance(root, Var):
        return {}
    # collect the subgraph, then process in reverse creation order (a valid
    # reverse topological order since parents are always created first)
    seen = {id(root): root}
    stack = [root]
    while stack:
        v = stack.pop()
        for p in v.parents:
            if isinstance(p, Var) and id(p) not in seen:
                seen[id(p)] = p
                stack.append(p)
    grads = {id(root): np.ones_like(root.value) if seed is None else seed}
    for v in sorted(seen.values(), key=lambda v: v.order, reverse=True):
        g = grads.get(id(v))
        if g is None or v.vjp is None:
            continue
        parent_grads = v.vjp(g)
        for p, pg in zip(v.parents, parent_grads):
            if pg is None or not isinstance(p, Var):
                continue
            pg = np.asarray(pg, dtype=np.result_type(p.value, np.float32))
            if pg.shape != np.shape(p.value):
                pg = unbroadcast(pg, np.shape(p.value))
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg
    return grads


def grad_of(grads: dict, var: Var) -> np.ndarray:
    g = grads.get(id(var))
    if g is None:
        return np.zeros_like(var.value)
    return g
