"""Interpreter for graph alternatives with ancestor-conditioned caching.

A node's value under a configuration depends only on the alternatives selected
for the node and its ancestors. The cache key of a node is therefore built
recursively from its selected alternative id and the keys of the upstream
nodes that alternative reads, so configurations that agree on a node's
ancestors share its cached value.
"""
from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..dsl import (BUILTINS, BinOp, Call, CallableCall, GlobalRef, Lambda, ListLit, Name, Num,
                   Param, UnaryOp, parse, positional_params)
from ..dsl.analysis import GLOBALS_PARAM
from . import ops
from .autodiff import Var, apply, backward, grad_of, value_of


class EvalError(Exception):
    """Runtime failure attributed to the alternative whose own code raised."""

    def __init__(self, message: str, alt_id: str | None = None):
        super().__init__(message)
        self.message = message
        self.alt_id = alt_id

    def __str__(self):
        return f"{self.alt_id}: {self.message}" if self.alt_id else self.message


class EvalCache:
    """Value store shared across configurations of one frozen graph.

    A cache is bound to one (dataset, globals store, dtype) triple on first use
    and cleared if used with another. Failures are cached like values.
    ``computations`` counts actual evaluations per key, so any count above one
    is a recomputation the cache failed to avoid.
    """

    def __init__(self):
        self._values: dict = {}
        self._keys: dict = {}
        self._lock = threading.Lock()
        self._binding = None
        self.computations: Counter = Counter()
        self.hits = 0

    def bind(self, dataset, store, dtype):
        binding = (id(dataset), id(store), np.dtype(dtype).str)
        with self._lock:
            if self._binding != binding:
                self._values.clear()
                self._keys.clear()
                self._binding = binding

    def intern(self, key: tuple) -> int:
        with self._lock:
            k = self._keys.get(key)
            if k is None:
                k = self._keys[key] = len(self._keys)
            return k

    def lookup(self, key):
        with self._lock:
            if key in self._values:
                self.hits += 1
                return True, self._values[key]
        return False, None

    def store(self, key, value):
        with self._lock:
            self._values[key] = value
            self.computations[key] += 1

    @property
    def recomputations(self) -> int:
        return sum(c - 1 for c in self.computations.values() if c > 1)

    def __len__(self):
        return len(self._values)


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (n_samples, n_columns)
    names: list  # column names: alt id, or "id[j]" for multi-column outputs
    alt_ids: list  # owning output alternative per column
    failures: list = field(default_factory=list)  # (output alt id, origin alt id, message)

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]


class _Failure:
    __slots__ = ("error",)

    def __init__(self, error: EvalError):
        self.error = error


def _check_finite(value, alt_id, what):
    v = value_of(value)
    if isinstance(v, np.ndarray) and v.dtype.kind == "f" and not np.all(np.isfinite(v)):
        raise EvalError(f"{what} produced non-finite values", alt_id)
    if isinstance(v, float) and not np.isfinite(v):
        raise EvalError(f"{what} produced a non-finite value", alt_id)


class GraphEvaluation:
    """Evaluation of one graph under one configuration.

    Node values are memoised for the lifetime of the object; with an
    :class:`EvalCache` they are also shared across configurations. With
    ``globals_values`` (possibly :class:`Var` leaves) the evaluation records a
    differentiation tape and bypasses the cache.
    """

    def __init__(self, graph, config, dataset, cache: EvalCache | None = None, dtype=np.float32,
                 globals_values: dict | None = None):
        self.graph = graph
        self.config = config
        self.dtype = np.dtype(dtype)
        self.inputs = dataset.as_dtype(self.dtype)
        self.n_samples = dataset.n_samples
        if globals_values is None:
            self.globals = {k: v.astype(self.dtype) for k, v in graph.globals.values().items()}
            self.cache = cache
            if cache is not None:
                cache.bind(dataset, graph.globals, self.dtype)
        else:
            self.globals = globals_values
            self.cache = None
        self._memo: dict = {}
        self._keys: dict = {}
        self.computed: Counter = Counter()

    # --- keys ---------------------------------------------------------------

    def key(self, node: str):
        k = self._keys.get(node)
        if k is None:
            if not self.graph.nodes.get(node):
                k = ("<empty>", node)
            else:
                k = self.alt_key(self.graph.selected(node, self.config))
            self._keys[node] = k
        return k

    def alt_key(self, alt) -> tuple:
        ups = tuple(sorted((u, self.key(u)) for u in self.graph.deps(alt).upstream
                           if u in self.graph.nodes))
        raw = (alt.node, alt.id, ups)
        return self.cache.intern(raw) if self.cache is not None else raw

    # --- nodes --------------------------------------------------------------

    def node(self, name: str):
        if name in self._memo:
            out = self._memo[name]
        else:
            if not self.graph.nodes.get(name):
                raise EvalError(f"node {name!r} is missing or has no alternatives")
            alt = self.graph.selected(name, self.config)
            if name.startswith("@") or name == "ridge_g":
                out = alt  # function-valued: applied at call sites
            else:
                out = self._alt_value(alt)
            self._memo[name] = out
        if isinstance(out, _Failure):
            raise out.error
        return out

    def alternative(self, alt):
        """Value of one alternative (used for output alternatives)."""
        out = self._alt_value(alt)
        if isinstance(out, _Failure):
            raise out.error
        return out

    def _alt_value(self, alt):
        if self.cache is None:
            return self._compute(alt)
        key = self.alt_key(alt)
        hit, value = self.cache.lookup(key)
        if hit:
            return value
        value = self._compute(alt)
        self.cache.store(key, value)
        return value

    def _compute(self, alt):
        self.computed[alt.id] += 1
        try:
            with np.errstate(all="ignore"):
                value = self._eval(alt.body.body, {}, alt)
            value = self._as_tensor(value)
            _check_finite(value, alt.id, f"node {alt.node!r}")
            return value
        except EvalError as exc:
            return _Failure(exc if exc.alt_id else EvalError(exc.message, alt.id))
        except (ValueError, TypeError, IndexError, ZeroDivisionError, FloatingPointError,
                OverflowError, KeyError, np.linalg.LinAlgError) as exc:
            return _Failure(EvalError(f"{type(exc).__name__}: {exc}", alt.id))

    def _as_tensor(self, value):
        if isinstance(value, Var):
            return value
        return np.asarray(value, dtype=self.dtype)

    def call(self, alt, args: list):
        """Invoke a callable (or ridge_g) alternative on argument values."""
        params = positional_params(alt.ast)
        if len(params) != len(args):
            raise EvalError(f"{alt.node} expects {len(params)} arguments, got {len(args)}", alt.id)
        env = dict(zip(params, args))
        try:
            with np.errstate(all="ignore"):
                out = self._as_tensor(self._eval(alt.ast.body, env, alt))
        except EvalError:
            raise
        except (ValueError, TypeError, IndexError, ZeroDivisionError, FloatingPointError,
                OverflowError, KeyError, np.linalg.LinAlgError) as exc:
            raise EvalError(f"{type(exc).__name__}: {exc}", alt.id) from exc
        _check_finite(out, alt.id, f"callable {alt.node!r}")
        return out

    # --- interpreter --------------------------------------------------------

    def _eval(self, e, env: dict, alt):
        if isinstance(e, Num):
            return self.dtype.type(e.value)
        if isinstance(e, Param):
            if e.id in env:
                return env[e.id]
            if e.id == GLOBALS_PARAM:
                raise EvalError("the globals parameter can only be indexed", alt.id)
            return self._name(e.id, alt)
        if isinstance(e, Name):
            return self._name(e.id, alt)
        if isinstance(e, GlobalRef):
            if e.key not in self.globals:
                raise EvalError(f"unknown globals entry {e.key!r}", alt.id)
            return self.globals[e.key]
        if isinstance(e, BinOp):
            return ops.binary(e.op, self._eval(e.left, env, alt), self._eval(e.right, env, alt))
        if isinstance(e, UnaryOp):
            v = self._eval(e.operand, env, alt)
            return ops.negate(v) if e.op == "-" else v
        if isinstance(e, Call):
            return self._builtin(e, env, alt)
        if isinstance(e, CallableCall):
            target = self.node(e.name)
            args = [self._eval(a, env, alt) for a in e.args]
            return self.call(target, args)
        if isinstance(e, ListLit):
            return np.asarray([value_of(self._eval(i, env, alt)) for i in e.items], dtype=self.dtype)
        raise EvalError(f"cannot evaluate {type(e).__name__}", alt.id)

    def _name(self, name, alt):
        if name in self.inputs:
            return self.inputs[name]
        if name in self.graph.nodes:
            return self.node(name)
        raise EvalError(f"unresolvable identifier {name!r}", alt.id)

    def _builtin(self, e: Call, env, alt):
        sig = BUILTINS.get(e.func)
        impl = ops.IMPLS.get(e.func)
        if sig is None or impl is None:
            raise EvalError(f"unknown builtin {e.func!r}", alt.id)

        def arg(expr, kind):
            v = self._eval(expr, env, alt)
            if kind == "static":
                v = value_of(v)
                if np.ndim(v) != 0:
                    raise EvalError(f"{e.func}: static argument must be a scalar", alt.id)
                return float(v)
            return v

        kwargs = {k: arg(v, sig.kind_of(k)) for k, v in e.kwargs}
        if sig.variadic:
            pos = [arg(a, sig.variadic) for a in e.args]
            return impl(*pos, **kwargs)
        for i, a in enumerate(e.args):
            name = sig.params[i][0]
            kwargs[name] = arg(a, sig.params[i][1])
        return impl(**kwargs)


# --- public API --------------------------------------------------------------


def evaluate_node(graph, config, node: str, dataset, cache: EvalCache | None = None,
                  dtype=np.float32):
    """Value of ``node`` under ``config``; raises EvalError on failure."""
    return GraphEvaluation(graph, config, dataset, cache, dtype).node(node)


def _check_output_shape(value, alt_id, n):
    v = value_of(value)
    if np.ndim(v) == 0 or v.shape[0] != n:
        raise EvalError(f"output has shape {np.shape(v)}, expected leading dimension {n}", alt_id)
    if v.size == 0:
        raise EvalError("output is empty", alt_id)


def _column_names(alt_id, shape) -> list:
    if len(shape) == 1:
        return [alt_id]
    return [f"{alt_id}[{j}]" for j in range(int(np.prod(shape[1:])))]


def output_columns(ev: GraphEvaluation):
    """Evaluate every output alternative; yields ``(alt, value)`` or collects failures."""
    results, failures = [], []
    for alt in ev.graph.alternatives("output"):
        try:
            value = ev.alternative(alt)
            _check_output_shape(value, alt.id, ev.n_samples)
            results.append((alt, value))
        except EvalError as exc:
            failures.append((alt.id, exc.alt_id or alt.id, exc.message))
    return results, failures


def evaluate_outputs(graph, config, dataset, cache: EvalCache | None = None,
                     dtype=np.float32) -> FeatureMatrix:
    """Stack all output alternatives into an (n_samples, n_columns) matrix.

    Failed outputs are skipped and reported; if every output fails the whole
    configuration fails with the first error.
    """
    ev = GraphEvaluation(graph, config, dataset, cache, dtype)
    results, failures = output_columns(ev)
    if not results:
        if failures:
            out_id, origin, msg = failures[0]
            raise EvalError(f"all outputs failed; first: {msg}", origin)
        raise EvalError("graph has no output alternatives")
    cols, names, owners = [], [], []
    n = dataset.n_samples
    for alt, value in results:
        v = np.asarray(value).reshape(n, -1)
        cols.append(v)
        names.extend(_column_names(alt.id, value.shape))
        owners.extend([alt.id] * v.shape[1])
    return FeatureMatrix(np.concatenate(cols, axis=1).astype(dtype, copy=False), names, owners,
                         failures)


def tape_outputs(graph, config, dataset, globals_vars: dict):
    """Differentiable float64 feature matrix as a Var of shape (n, k).

    ``globals_vars`` maps entry name to a Var leaf (or array). Returns
    ``(matrix, names, failures)``; failing outputs are left out.
    """
    ev = GraphEvaluation(graph, config, dataset, None, np.float64, globals_values=globals_vars)
    results, failures = output_columns(ev)
    if not results:
        raise EvalError("all outputs failed on the training path")
    n = dataset.n_samples
    parts, names = [], []
    for alt, value in results:
        shape = np.shape(value_of(value))
        parts.append(_reshape(value, (n, int(np.prod(shape[1:])))))
        names.extend(_column_names(alt.id, shape))
    matrix = parts[0] if len(parts) == 1 else ops.IMPLS["concat"](*parts, axis=1)
    return matrix, names, failures


def _reshape(x, shape):
    def prim(v):
        return v.reshape(shape), lambda g: (g.reshape(v.shape),)
    return apply(prim, (x,))


def grad_globals(graph, config, dataset, loss) -> dict:
    """d(loss)/d(entry) for every globals entry, in float64.

    ``loss`` is a DSL lambda (or its source) of two parameters, the stacked
    output matrix and the label vector, returning a scalar. Entries not on the
    evaluated path get exact zero gradients.
    """
    if isinstance(loss, str):
        loss = parse(loss)
    leaves = {k: Var(v.astype(np.float64), name=k) for k, v in graph.globals.values().items()}
    matrix, _, _ = tape_outputs(graph, config, dataset, leaves)
    labels = dataset.labels.astype(np.float64)
    value = _eval_loss(loss, matrix, labels, graph, config, dataset, leaves)
    if np.ndim(value_of(value)) != 0:
        raise EvalError(f"loss must be scalar, got shape {np.shape(value_of(value))}")
    grads = backward(value)
    return {k: grad_of(grads, v) for k, v in leaves.items()}


def _eval_loss(loss: Lambda, matrix, labels, graph, config, dataset, leaves):
    params = positional_params(loss)
    if len(params) != 2:
        raise EvalError("loss takes (outputs, labels)")
    ev = GraphEvaluation(graph, config, dataset, None, np.float64, globals_values=leaves)
    return ev._eval(loss.body, {params[0]: matrix, params[1]: labels}, _LOSS_OWNER)


class _LossOwner:
    id = "<loss>"
    node = "<loss>"


_LOSS_OWNER = _LossOwner()
