"""Append-only store of trainable tensors (the ``@globals`` node)."""
from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np

from ..dsl import BinOp, Call, ListLit, Num, UnaryOp, parse_init


class AppendOnlyViolation(ValueError):
    pass


@dataclass(frozen=True)
class GlobalEntry:
    init: str
    value: np.ndarray
    trained: bool = False


def const_value(expr):
    """Evaluate a constant (parameter-free) expression to a float or nested list."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, UnaryOp):
        v = const_value(expr.operand)
        return -v if expr.op == "-" else v
    if isinstance(expr, BinOp):
        a, b = const_value(expr.left), const_value(expr.right)
        return {"+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b, "/": lambda: a / b,
                "**": lambda: a ** b, "<": lambda: float(a < b), "<=": lambda: float(a <= b),
                ">": lambda: float(a > b), ">=": lambda: float(a >= b),
                "==": lambda: float(a == b), "!=": lambda: float(a != b)}[expr.op]()
    if isinstance(expr, ListLit):
        return [const_value(i) for i in expr.items]
    raise ValueError(f"not a constant expression: {expr!r}")


def _shape(args) -> tuple:
    shape = tuple(int(const_value(a)) for a in args)
    if any(s <= 0 for s in shape):
        raise ValueError(f"invalid shape {shape}")
    return shape


def evaluate_init(source: str, rng: np.random.Generator) -> np.ndarray:
    """Evaluate a globals initialiser (``randn(8, 4) * 0.1`` ...) to float32."""
    expr = parse_init(source)

    def ev(node):
        if isinstance(node, Call):
            f = node.func
            if f == "randn":
                return rng.standard_normal(_shape(node.args))
            if f == "rand":
                return rng.random(_shape(node.args))
            if f == "zeros":
                return np.zeros(_shape(node.args))
            if f == "ones":
                return np.ones(_shape(node.args))
            if f == "arange":
                return np.arange(int(const_value(node.args[0])), dtype=np.float64)
            if f == "eye":
                return np.eye(int(const_value(node.args[0])))
            if f == "tensor":
                return np.asarray(const_value(node.args[0]), dtype=np.float64)
            fn = {"abs": np.abs, "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "tanh": np.tanh,
                  "sigmoid": lambda x: 1 / (1 + np.exp(-x))}[f]
            return fn(ev(node.args[0]))
        if isinstance(node, BinOp):
            a, b = ev(node.left), ev(node.right)
            return {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide,
                    "**": np.power}[node.op](a, b)
        if isinstance(node, UnaryOp):
            v = ev(node.operand)
            return -v if node.op == "-" else v
        return np.asarray(const_value(node), dtype=np.float64)

    with np.errstate(all="ignore"):
        value = np.asarray(ev(expr), dtype=np.float64)
    if not np.all(np.isfinite(value)):
        raise ValueError(f"initialiser {source!r} produced non-finite values")
    return value.astype(np.float32)


def entry_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


class GlobalsStore:
    """Ordered, append-only mapping ``name -> GlobalEntry``.

    Instances are treated as immutable: every modifier returns a new store.
    Mutations may only :meth:`add`; values change only through training
    (:meth:`with_values`), and entries disappear only through maintenance
    (:meth:`drop`).
    """

    def __init__(self, entries=None, seed: int = 0):
        self._entries: dict[str, GlobalEntry] = dict(entries or {})
        self.seed = int(seed)

    def __contains__(self, name):
        return name in self._entries

    def __getitem__(self, name) -> GlobalEntry:
        return self._entries[name]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def items(self):
        return self._entries.items()

    @property
    def names(self) -> tuple:
        return tuple(self._entries)

    def values(self) -> dict:
        return {k: e.value for k, e in self._entries.items()}

    def add(self, name: str, init: str, value: np.ndarray | None = None) -> "GlobalsStore":
        if name in self._entries:
            raise AppendOnlyViolation(f"append-only violation: globals entry {name!r} already exists")
        if value is None:
            value = evaluate_init(init, entry_rng(self.seed, name))
        entries = dict(self._entries)
        entries[name] = GlobalEntry(str(init), np.asarray(value, dtype=np.float32))
        return GlobalsStore(entries, self.seed)

    def with_values(self, values: dict, trained: bool = True) -> "GlobalsStore":
        entries = dict(self._entries)
        for k, v in values.items():
            old = entries[k]
            v = np.asarray(v, dtype=np.float32).reshape(old.value.shape)
            entries[k] = replace(old, value=v, trained=old.trained or trained)
        return GlobalsStore(entries, self.seed)

    def drop(self, names) -> "GlobalsStore":
        names = set(names)
        return GlobalsStore({k: e for k, e in self._entries.items() if k not in names}, self.seed)

    def equals(self, other: "GlobalsStore") -> bool:
        if self.names != other.names:
            return False
        return all(self[k].init == other[k].init and self[k].trained == other[k].trained
                   and np.array_equal(self[k].value, other[k].value) for k in self.names)

    def __repr__(self):
        return f"GlobalsStore({', '.join(f'{k}{tuple(e.value.shape)}' for k, e in self.items())})"
