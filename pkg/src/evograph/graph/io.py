"""Graph files: the plain YAML layout, its annotated variant for prompts, and
the sidecar metadata that makes a checkpointed graph exact.

Plain layout (a restricted YAML subset)::

    '@globals':
      rp_W: 'randn(8, 4) * (1.0 / 8.0 ** 0.5)'
    '@mr_ppv':
    - 'lambda seg, mask, globals: ...'
    output:
    - 'lambda pre, post: mean(post, axis=1) - mean(pre, axis=1)'

Every string is single-quoted on output; any YAML quoting is accepted on input.
"""
from __future__ import annotations

import re

import numpy as np
import yaml

from ..dsl import DslError
from ..tensor.globals_store import GlobalEntry, GlobalsStore
from .model import (GLOBALS_NODE, Alternative, AltStats, Configuration, EvoGraph, check_node_name,
                    reference_problems)


class GraphFormatError(ValueError):
    pass


def quote(text: str) -> str:
    return "'" + str(text).replace("'", "''") + "'"


_PLAIN_KEY = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def _key(name: str) -> str:
    if _PLAIN_KEY.match(name):
        try:
            if yaml.safe_load(f"{name}: 0") == {name: 0}:
                return name
        except yaml.YAMLError:
            pass
    return quote(name)


def _fmt(v) -> str:
    return "None" if v is None else f"{v:.4f}"


def dump_graph(graph: EvoGraph, annotate: bool = False) -> str:
    """Serialise to the plain layout; ``annotate`` appends ids and stats as comments."""
    lines = []
    if len(graph.globals):
        lines.append(f"{_key(GLOBALS_NODE)}:")
        for name, entry in graph.globals.items():
            note = ""
            if annotate:
                note = f"  # shape={tuple(entry.value.shape)} trained={'yes' if entry.trained else 'no'}"
            lines.append(f"  {_key(name)}: {quote(entry.init)}{note}")
    else:
        lines.append(f"{_key(GLOBALS_NODE)}: {{}}")
    for node, alts in graph.nodes.items():
        if not alts:
            lines.append(f"{_key(node)}: []")
            continue
        lines.append(f"{_key(node)}:")
        for alt in alts:
            note = ""
            if annotate:
                st = graph.stats_for(alt.id)
                note = (f"  # id={alt.id} age={st.age} n_evals={st.n_evals} best={_fmt(st.best_config_score)}"
                        f" mean={_fmt(st.mean_config_score)} failures={st.n_runtime_failures}")
            lines.append(f"- {quote(alt.source)}{note}")
    return "\n".join(lines) + "\n"


def parse_graph_document(text: str) -> tuple[dict, dict]:
    """Validate the layout and return ``(globals init map, node -> source list)``."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise GraphFormatError(f"invalid YAML: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise GraphFormatError("graph file must be a mapping of node name to alternatives")
    inits: dict = {}
    nodes: dict = {}
    for key, value in doc.items():
        if not isinstance(key, str):
            raise GraphFormatError(f"node name {key!r} is not a string")
        if key == GLOBALS_NODE:
            if value is None:
                value = {}
            if not isinstance(value, dict):
                raise GraphFormatError("'@globals' must map entry names to init expressions")
            for name, init in value.items():
                if not isinstance(name, str) or isinstance(init, (dict, list)) or init is None:
                    raise GraphFormatError(f"'@globals' entry {name!r} needs a scalar init expression")
                inits[name] = str(init)
            continue
        try:
            check_node_name(key)
        except ValueError as exc:
            raise GraphFormatError(str(exc)) from exc
        if value is None:
            value = []
        if not isinstance(value, list) or not all(isinstance(s, str) for s in value):
            raise GraphFormatError(f"node {key!r} must map to a list of lambda strings")
        nodes[key] = list(value)
    return inits, nodes


def build_graph(inits: dict, nodes: dict, inputs, seed: int = 0, id_prefix: str = "a",
                values: dict | None = None, ids: dict | None = None, next_id: int | None = None,
                **fields) -> EvoGraph:
    """Construct a graph, parsing every source; ids default to a fresh sequence."""
    store = GlobalsStore(seed=seed)
    for name, init in inits.items():
        try:
            store = store.add(name, init, None if values is None else values.get(name))
        except (DslError, ValueError) as exc:
            raise GraphFormatError(f"'@globals' entry {name!r}: {exc}") from exc
    counter = 0
    built = {}
    for node, sources in nodes.items():
        if node in inputs:
            raise GraphFormatError(f"node {node!r} shadows a dataset input")
        alts = []
        for i, src in enumerate(sources):
            if ids is not None:
                alt_id = ids[node][i]
            else:
                alt_id = f"{id_prefix}{counter}"
                counter += 1
            try:
                alts.append(Alternative.create(node, alt_id, src))
            except DslError as exc:
                raise GraphFormatError(f"{node}[{i}]: {exc}") from exc
        built[node] = tuple(alts)
    graph = EvoGraph(built, store, frozenset(inputs), id_prefix=id_prefix,
                     next_id=counter if next_id is None else next_id, **fields)
    cycle = graph.find_cycle()
    if cycle:
        raise GraphFormatError("dependency cycle: " + " -> ".join(cycle))
    return graph


def load_graph(text: str, inputs, seed: int = 0, id_prefix: str = "a",
               check_references: bool = True) -> EvoGraph:
    inits, nodes = parse_graph_document(text)
    graph = build_graph(inits, nodes, inputs, seed, id_prefix)
    if check_references:
        problems = reference_problems(graph)
        if problems:
            raise GraphFormatError("; ".join(problems))
    return graph


def graph_meta(graph: EvoGraph) -> dict:
    """Everything the plain layout does not carry (ids, stats, counters)."""
    return {
        "version": graph.version,
        "next_id": graph.next_id,
        "id_prefix": graph.id_prefix,
        "inputs": sorted(graph.inputs),
        "globals_seed": graph.globals.seed,
        "globals_trained": {k: e.trained for k, e in graph.globals.items()},
        "ids": {n: [a.id for a in alts] for n, alts in graph.nodes.items()},
        "stats": {k: v.to_json() for k, v in sorted(graph.stats.items())},
        "incumbent": None if graph.incumbent is None else graph.incumbent.to_json(),
    }


def graph_from_parts(text: str, meta: dict, values: dict) -> EvoGraph:
    """Rebuild a graph exactly from its plain file, metadata and globals values."""
    inits, nodes = parse_graph_document(text)
    if set(nodes) != set(meta["ids"]) or any(len(nodes[n]) != len(meta["ids"][n]) for n in nodes):
        raise GraphFormatError("graph file and metadata disagree on node layout")
    graph = build_graph(inits, nodes, meta["inputs"], meta["globals_seed"], meta["id_prefix"],
                        values=values, ids=meta["ids"], next_id=meta["next_id"],
                        version=meta["version"],
                        stats={k: AltStats.from_json(v) for k, v in meta["stats"].items()},
                        incumbent=None if meta["incumbent"] is None
                        else Configuration.of(meta["incumbent"]))
    trained = meta.get("globals_trained", {})
    entries = {k: GlobalEntry(e.init, e.value, bool(trained.get(k, False)))
               for k, e in graph.globals.items()}
    return graph.with_globals(GlobalsStore(entries, graph.globals.seed))


def globals_arrays(graph: EvoGraph) -> dict:
    return {k: np.asarray(v) for k, v in graph.globals.values().items()}
