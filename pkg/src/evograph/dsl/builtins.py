"""The fixed builtin vocabulary and its call signatures.

A signature lists ``(name, kind, default)`` triples. ``kind`` is ``"tensor"``
for data-carrying arguments or ``"static"`` for arguments that must be constant
expressions (axes, slice bounds, quantile levels, dilation). ``REQUIRED`` marks
parameters without a default. A builtin may accept a variadic tensor tail.
"""
from __future__ import annotations

from dataclasses import dataclass

REQUIRED = object()


@dataclass(frozen=True)
class Signature:
    params: tuple
    variadic: str | None = None  # kind of the positional tail; named params become keyword-only
    min_variadic: int = 0

    @property
    def names(self) -> tuple:
        return tuple(p[0] for p in self.params)

    def bind(self, n_positional: int, keywords: tuple) -> dict:
        """Map call-site arguments to parameter slots; raise ValueError on mismatch."""
        slots: dict = {}
        if self.variadic:
            # positional args all go to the variadic tail; named params are keyword-only
            if n_positional < self.min_variadic:
                raise ValueError(f"expects at least {self.min_variadic} positional arguments, got {n_positional}")
            slots["*"] = list(range(n_positional))
        else:
            if n_positional > len(self.params):
                raise ValueError(f"expects at most {len(self.params)} arguments, got {n_positional}")
            for i in range(n_positional):
                slots[self.params[i][0]] = i
        for kw in keywords:
            if kw not in self.names:
                raise ValueError(f"unexpected keyword argument {kw!r}")
            if kw in slots:
                raise ValueError(f"argument {kw!r} given twice")
            slots[kw] = kw
        for name, _, default in self.params:
            if name not in slots and default is REQUIRED:
                raise ValueError(f"missing required argument {name!r}")
        return slots

    def kind_of(self, name: str) -> str:
        if name == "*":
            return self.variadic or "tensor"
        for p, kind, _ in self.params:
            if p == name:
                return kind
        return "tensor"


def _sig(*params, variadic=None, min_variadic=0):
    return Signature(tuple(params), variadic, min_variadic)


_X = ("x", "tensor", REQUIRED)
_AXIS = ("axis", "static", -1)

ELEMENTWISE = ("abs", "exp", "log", "sqrt", "tanh", "sigmoid", "relu", "silu", "sign",
               "ones_like", "zeros_like")
REDUCTIONS = ("sum", "mean", "var", "std", "max", "min", "median")

BUILTINS: dict[str, Signature] = {}
for _name in ELEMENTWISE:
    BUILTINS[_name] = _sig(_X)
for _name in REDUCTIONS:
    BUILTINS[_name] = _sig(_X, _AXIS)
BUILTINS.update(
    clamp=_sig(_X, ("lo", "tensor", REQUIRED), ("hi", "tensor", None)),
    where=_sig(("cond", "tensor", REQUIRED), ("a", "tensor", REQUIRED), ("b", "tensor", REQUIRED)),
    min2=_sig(("a", "tensor", REQUIRED), ("b", "tensor", REQUIRED)),
    max2=_sig(("a", "tensor", REQUIRED), ("b", "tensor", REQUIRED)),
    matmul=_sig(("a", "tensor", REQUIRED), ("b", "tensor", REQUIRED)),
    concat=_sig(_AXIS, variadic="tensor", min_variadic=1),
    slice=_sig(_X, ("start", "static", REQUIRED), ("stop", "static", REQUIRED), _AXIS),
    quantile=_sig(_X, ("q", "static", REQUIRED), _AXIS),
    diff=_sig(_X, _AXIS),
    cumsum=_sig(_X, _AXIS),
    rfft_power=_sig(_X, _AXIS),
    conv1d=_sig(_X, ("w", "tensor", REQUIRED), ("dilation", "static", 1)),
)

# Constructors allowed only in ``@globals`` initialisation expressions.
INIT_BUILTINS: dict[str, Signature] = {
    "randn": _sig(variadic="static", min_variadic=1),
    "rand": _sig(variadic="static", min_variadic=1),
    "zeros": _sig(variadic="static", min_variadic=1),
    "ones": _sig(variadic="static", min_variadic=1),
    "arange": _sig(("n", "static", REQUIRED)),
    "eye": _sig(("n", "static", REQUIRED)),
    "tensor": _sig(("data", "static", REQUIRED)),
}
# arithmetic on constructed tensors is still useful: randn(8, 4) * 0.1
for _name in ("abs", "exp", "log", "sqrt", "tanh", "sigmoid"):
    INIT_BUILTINS[_name] = BUILTINS[_name]
