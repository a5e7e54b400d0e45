"""Configuration enumeration under an evaluation cap."""
from __future__ import annotations

import itertools
import math

import numpy as np

from .model import Configuration, EvoGraph


def config_product(graph: EvoGraph) -> int:
    """Size of the full configuration space (product of alternative counts)."""
    return math.prod(len(graph.nodes[n]) for n in graph.config_nodes())


def project(graph: EvoGraph, config: Configuration | None) -> Configuration:
    """Restrict ``config`` to the current axes, defaulting to first alternatives."""
    sel = {}
    for node in graph.config_nodes():
        ids = [a.id for a in graph.nodes[node]]
        chosen = config.get(node) if config is not None else None
        sel[node] = chosen if chosen in ids else ids[0]
    return Configuration.of(sel)


def enumerate_configs(graph: EvoGraph, cap: int = 64, incumbent: Configuration | None = None,
                      rng: np.random.Generator | None = None) -> list:
    """Configurations to evaluate, at most ``cap`` of them.

    If the whole product fits, it is returned in lexicographic order (nodes
    sorted by name, alternatives in stored order). Otherwise the list starts
    with the incumbent, continues with all single-node deviations from it
    (nodes by name, alternatives in stored order) and is filled with distinct
    random draws from the rest of the space.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    axes = graph.config_nodes()
    choices = [[a.id for a in graph.nodes[n]] for n in axes]
    total = math.prod(len(c) for c in choices)
    if total <= cap:
        return [Configuration(tuple(zip(axes, combo))) for combo in itertools.product(*choices)]

    base = project(graph, incumbent if incumbent is not None else graph.incumbent)
    out = [base]
    seen = {base}
    sel = base.selection
    for node, ids in zip(axes, choices):
        for alt_id in ids:
            if len(out) >= cap:
                return out
            if alt_id == sel[node]:
                continue
            cfg = Configuration.of({**sel, node: alt_id})
            if cfg not in seen:
                seen.add(cfg)
                out.append(cfg)
    rng = rng if rng is not None else np.random.default_rng(0)
    sizes = [len(c) for c in choices]
    while len(out) < cap:
        picks = [int(rng.integers(s)) for s in sizes]
        cfg = Configuration(tuple((n, c[i]) for n, c, i in zip(axes, choices, picks)))
        if cfg not in seen:
            seen.add(cfg)
            out.append(cfg)
    return out
