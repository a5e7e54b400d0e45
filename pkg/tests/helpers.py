"""Shared generators for tests: small datasets, random graphs, random expressions."""
from __future__ import annotations

import numpy as np

from evograph.tensor import Dataset

ELEMENTWISE_SAFE = ("tanh({})", "sigmoid({})", "silu({})", "({}) * ({})", "({}) + ({})",
                    "({}) - ({})", "sqrt(1 + ({}) * ({}))", "log(1 + ({}) * ({}))",
                    "({}) / (2 + tanh({}))", "exp(-({}) * ({}))")


def small_dataset(seed: int = 0, n: int = 60, length: int = 12) -> Dataset:
    rng = np.random.default_rng(seed)
    y = np.zeros(n)
    y[rng.permutation(n)[: n // 3]] = 1
    x = rng.normal(size=(n, length)) + 0.8 * y[:, None] * np.linspace(0, 1, length)
    z = rng.normal(size=(n, length))
    return Dataset({"x": x, "z": z}, y)


def _fill(template: str, args: list) -> str:
    k = template.count("{}")
    picks = [args[i % len(args)] for i in range(k)]
    return template.format(*picks)


def random_graph_text(rng: np.random.Generator, n_nodes: int = 4, max_alts: int = 3,
                      callables: bool = True, with_globals: bool = True) -> str:
    """A random valid graph over inputs ``x`` and ``z`` (both (n, L))."""
    lines = []
    if with_globals:
        lines += ["'@globals':", "  s: 'ones(1) * 0.5'", "  v: 'randn(12) * 0.1'"]
    else:
        lines.append("'@globals': {}")
    if callables:
        lines += ["'@f':", "- 'lambda a: tanh(a)'", "- 'lambda a: a * sigmoid(a)'"]
    names = ["x", "z"]
    for i in range(n_nodes):
        node = f"n{i}"
        lines.append(f"{node}:")
        n_alt = int(rng.integers(1, max_alts + 1))
        seen = set()
        for _ in range(n_alt):
            while True:
                ins = list(rng.choice(names, size=2, replace=True))
                expr = _fill(ELEMENTWISE_SAFE[rng.integers(len(ELEMENTWISE_SAFE))], ins)
                r = rng.random()
                if callables and r < 0.3:
                    expr = f"@f({expr})"
                elif with_globals and r < 0.5:
                    expr = f"({expr}) * globals[\"s\"] + globals[\"v\"]"
                if expr not in seen:
                    seen.add(expr)
                    break
            params = sorted(set(ins))
            lines.append(f"- 'lambda {', '.join(params)}: {expr}'")
        names.append(node)
    lines.append("output:")
    inter = names[2:]
    picks = rng.choice(inter, size=min(3, len(inter)), replace=False)
    for j, node in enumerate(picks):
        red = ("mean", "std", "max")[j % 3]
        lines.append(f"- 'lambda {node}: {red}({node}, axis=1)'")
    return "\n".join(lines) + "\n"


# --- random expressions for gradient checks ---------------------------------

_UNARY = ("tanh({})", "sigmoid({})", "silu({})", "exp(-({}) * ({}))", "sqrt(1 + ({}) * ({}))",
          "log(1 + ({}) * ({}))", "cumsum({}, axis=1) * 0.1", "({}) ** 2")
_BINARY = ("({}) + ({})", "({}) - ({})", "({}) * ({})", "({}) / (1.5 + tanh({}))",
           "where(x > 0, {}, {})", "clamp({}, -50, 50) * 0.5 + ({}) * 0.5")
_LEAVES = ("x", "globals[\"a\"]", "globals[\"b\"]", "x * globals[\"a\"]", "globals[\"b\"] * x",
           "0.3")


def random_expression(rng: np.random.Generator, depth: int = 3) -> str:
    """Random DSL body over input ``x`` (n, L) and globals ``a`` (1,), ``b`` (L,)."""
    if depth == 0 or rng.random() < 0.2:
        return _LEAVES[rng.integers(len(_LEAVES))]
    if rng.random() < 0.45:
        t = _UNARY[rng.integers(len(_UNARY))]
        sub = random_expression(rng, depth - 1)
        return t.format(*([sub] * t.count("{}")))
    t = _BINARY[rng.integers(len(_BINARY))]
    return t.format(random_expression(rng, depth - 1), random_expression(rng, depth - 1))
