"""Gradient refinement of globals entries on a fixed configuration.

An ephemeral logistic readout on standardised features is trained jointly with
the globals entries the features actually depend on, then thrown away.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..tensor import ops
from ..tensor.autodiff import Var, apply, backward, grad_of, value_of
from ..tensor.evaluator import EvalError, tape_outputs
from .lbfgs import minimize

STANDARDIZE_EPS = 1e-8
READOUT_L2 = 1e-4


@dataclass
class Phase1Result:
    store: object  # GlobalsStore after refinement (the input store if skipped or reverted)
    skipped: bool
    reason: str = ""
    budget: int = 0
    iterations: int = 0
    active: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    reverted: bool = False

    def to_json(self) -> dict:
        return {"skipped": self.skipped, "reason": self.reason, "budget": self.budget,
                "iterations": self.iterations, "active": list(self.active),
                "loss_trajectory": [float(v) for v in self.trajectory], "reverted": self.reverted}


def probe(graph, config, dataset, seed: int = 0) -> list:
    """Globals entries whose value changes the raw features on this path.

    Uses the gradient of sum(F * R) for a fixed random R: an entry with an
    exactly zero gradient does not influence the features.
    """
    if not len(graph.globals):
        return []
    leaves = {k: Var(v.astype(np.float64), name=k) for k, v in graph.globals.values().items()}
    matrix, _, _ = tape_outputs(graph, config, dataset, leaves)
    if not isinstance(matrix, Var):
        return []
    R = np.random.default_rng(seed).standard_normal(np.shape(matrix.value))
    total = _sum_all(ops.binary("*", matrix, R))
    grads = backward(total)
    return [k for k, v in leaves.items() if np.any(grad_of(grads, v) != 0)]


def _sum_all(x):
    return apply(lambda v: (np.sum(v), lambda g: (np.full(v.shape, g),)), (x,))


def _softplus(x):
    def prim(v):
        out = np.maximum(v, 0) + np.log1p(np.exp(-np.abs(v)))
        return out, lambda g: (g / (1 + np.exp(-v)),)
    return apply(prim, (x,))


def readout_loss(matrix, labels, w, b):
    """Mean logistic loss of a linear readout on column-standardised features."""
    mean = ops.IMPLS["mean"](matrix, axis=0)
    var = ops.IMPLS["var"](matrix, axis=0)
    z = ops.binary("/", ops.binary("-", matrix, mean),
                   ops.IMPLS["sqrt"](ops.binary("+", var, STANDARDIZE_EPS)))
    logits = ops.binary("+", ops.IMPLS["matmul"](z, w), b)
    nll = ops.binary("-", _softplus(logits), ops.binary("*", labels, logits))
    n = np.shape(value_of(matrix))[0]
    reg = ops.binary("*", READOUT_L2, _sum_all(ops.binary("*", w, w)))
    return ops.binary("+", ops.binary("/", _sum_all(nll), float(n)), reg)


def phase1_refine(graph, config, dataset, iters: int, seed: int = 0) -> Phase1Result:
    """Refine the globals entries that influence the features of ``config``."""
    store = graph.globals
    try:
        active = probe(graph, config, dataset, seed)
    except EvalError as exc:
        return Phase1Result(store, True, f"probe failed: {exc}", iters)
    if not active:
        return Phase1Result(store, True, "probe: no globals entry influences the features", iters)

    values = store.values()
    shapes = [values[k].shape for k in active]
    sizes = [int(np.prod(s)) for s in shapes]
    labels = dataset.labels.astype(np.float64)
    fixed = {k: v.astype(np.float64) for k, v in values.items() if k not in active}
    # column count is pinned by the start point; losing a column later is a failure
    _, names0, _ = tape_outputs(graph, config, dataset, {**fixed, **{k: values[k].astype(np.float64)
                                                                     for k in active}})
    k_cols = len(names0)
    p = float(np.clip(labels.mean(), 1e-6, 1 - 1e-6))
    x0 = np.concatenate([values[k].astype(np.float64).ravel() for k in active]
                        + [np.zeros(k_cols), [np.log(p / (1 - p))]])

    def unpack(x):
        out, pos = {}, 0
        for k, s, m in zip(active, shapes, sizes):
            out[k] = x[pos:pos + m].reshape(s)
            pos += m
        return out, x[pos:pos + k_cols], x[pos + k_cols]

    def fun(x):
        g_vals, w, b = unpack(x)
        leaves = {k: Var(v, name=k) for k, v in g_vals.items()}
        wv, bv = Var(w), Var(np.asarray(b))
        try:
            with np.errstate(all="ignore"):
                matrix, names, _ = tape_outputs(graph, config, dataset, {**fixed, **leaves})
                if names != names0:
                    return np.inf, np.zeros_like(x)
                loss = readout_loss(matrix, labels, wv, bv)
        except EvalError:
            return np.inf, np.zeros_like(x)
        f = float(value_of(loss))
        if not np.isfinite(f):
            return np.inf, np.zeros_like(x)
        grads = backward(loss)
        flat = [np.ravel(grad_of(grads, leaves[k])) for k in active]
        flat += [np.ravel(grad_of(grads, wv)), np.ravel(grad_of(grads, bv))]
        return f, np.concatenate(flat)

    result = minimize(fun, x0, max_iter=iters)
    if not np.isfinite(result.loss) or result.stop_reason == "nonfinite_start":
        return Phase1Result(store, False, "non-finite loss; reverted", iters, 0, active,
                            result.trajectory, reverted=True)
    trained, _, _ = unpack(result.x)
    new_store = store.with_values({k: v.astype(np.float32) for k, v in trained.items()})
    return Phase1Result(new_store, False, result.stop_reason, iters, result.iterations, active,
                        result.trajectory)
