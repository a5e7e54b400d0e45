"""Mutation sets: the engineer's YAML output and its atomic application.

Text format::

    remove:
      - a17
    add:
      output:
        - 'lambda pre, post: mean(post, axis=1) - mean(pre, axis=1)'
    add_globals:
      scale: 'ones(1)'

All keys are optional; an empty document is a no-op. Markdown code fences
around the YAML are tolerated.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import yaml

from ..dsl import DslError, parse
from ..tensor.globals_store import AppendOnlyViolation
from .io import _key, quote
from .model import (GLOBALS_NODE, OUTPUT, Alternative, AltStats, EvoGraph, GraphError,
                    check_node_name, reference_problems)


class MutationError(ValueError):
    """A mutation that cannot be applied; the graph is left untouched."""

    def __init__(self, message: str, kind: str = "invalid"):
        super().__init__(message)
        self.kind = kind


@dataclass(frozen=True)
class MutationSet:
    remove: tuple = ()
    add: dict = field(default_factory=dict)  # node -> tuple of sources
    add_globals: dict = field(default_factory=dict)  # name -> init expression

    @property
    def is_noop(self) -> bool:
        return not (self.remove or any(self.add.values()) or self.add_globals)

    def summary(self) -> dict:
        return {"remove": list(self.remove), "add": {k: len(v) for k, v in self.add.items()},
                "add_globals": list(self.add_globals)}

    def __eq__(self, other):
        return (isinstance(other, MutationSet) and self.remove == other.remove
                and self.add == other.add and self.add_globals == other.add_globals)


_FENCE = re.compile(r"^\s*```[A-Za-z0-9_-]*\s*$")


def strip_fences(text: str) -> str:
    lines = text.strip("\n").splitlines()
    if lines and _FENCE.match(lines[0]):
        lines = lines[1:]
        if lines and _FENCE.match(lines[-1]):
            lines = lines[:-1]
    return "\n".join(lines)


def parse_mutation(text: str) -> MutationSet:
    """Parse engineer output; raises MutationError(kind="format") on bad shape."""
    try:
        doc = yaml.safe_load(strip_fences(text))
    except yaml.YAMLError as exc:
        raise MutationError(f"mutation is not valid YAML: {exc}", "format") from exc
    if doc is None:
        return MutationSet()
    if not isinstance(doc, dict):
        raise MutationError("mutation must be a mapping with remove/add/add_globals keys", "format")
    unknown = set(doc) - {"remove", "add", "add_globals"}
    if unknown:
        raise MutationError(f"unknown mutation keys: {sorted(map(str, unknown))}", "format")
    remove = doc.get("remove") or []
    if not isinstance(remove, list) or not all(isinstance(r, (str, int)) for r in remove):
        raise MutationError("'remove' must be a list of alternative ids", "format")
    add = doc.get("add") or {}
    if not isinstance(add, dict):
        raise MutationError("'add' must map node names to lists of lambda strings", "format")
    adds = {}
    for node, sources in add.items():
        if isinstance(sources, str):
            sources = [sources]
        if not isinstance(node, str) or not isinstance(sources, list) or \
                not all(isinstance(s, str) for s in sources):
            raise MutationError(f"'add.{node}' must be a list of lambda strings", "format")
        adds[node] = tuple(sources)
    glob = doc.get("add_globals") or {}
    if not isinstance(glob, dict) or not all(isinstance(k, str) and isinstance(v, (str, int, float))
                                             for k, v in glob.items()):
        raise MutationError("'add_globals' must map names to init expressions", "format")
    return MutationSet(tuple(str(r) for r in remove), adds, {k: str(v) for k, v in glob.items()})


def dump_mutation(m: MutationSet) -> str:
    lines = []
    if m.remove:
        lines.append("remove:")
        lines.extend(f"  - {quote(r)}" for r in m.remove)
    if m.add:
        lines.append("add:")
        for node, sources in m.add.items():
            if not sources:
                lines.append(f"  {_key(node)}: []")
                continue
            lines.append(f"  {_key(node)}:")
            lines.extend(f"    - {quote(s)}" for s in sources)
    if m.add_globals:
        lines.append("add_globals:")
        lines.extend(f"  {_key(k)}: {quote(v)}" for k, v in m.add_globals.items())
    return "\n".join(lines) + "\n" if lines else "{}\n"


@dataclass(frozen=True)
class AppliedMutation:
    graph: EvoGraph
    added: tuple  # ids of new alternatives, in mutation order
    removed: tuple
    new_nodes: tuple
    new_globals: tuple


def apply_mutation(graph: EvoGraph, m: MutationSet) -> AppliedMutation:
    """Apply ``m`` to a copy of ``graph``; raise MutationError without side effects."""
    nodes = {k: list(v) for k, v in graph.nodes.items()}
    index = graph.alt_index
    for rid in m.remove:
        alt = index.get(rid)
        if alt is None:
            raise MutationError(f"unknown removal id {rid!r}", "unknown_id")
        nodes[alt.node] = [a for a in nodes[alt.node] if a.id != rid]
    if OUTPUT in graph.nodes and not nodes[OUTPUT] and not m.add.get(OUTPUT):
        raise MutationError("mutation would leave the output node without alternatives")

    store = graph.globals
    for name, init in m.add_globals.items():
        if not re.match(r"[A-Za-z_][A-Za-z0-9_]*\Z", name):
            raise MutationError(f"invalid globals entry name {name!r}")
        try:
            store = store.add(name, init)
        except AppendOnlyViolation as exc:
            raise MutationError(str(exc), "append_only") from exc
        except (DslError, ValueError) as exc:
            raise MutationError(f"add_globals.{name}: {exc}", "parse") from exc

    next_id = graph.next_id
    added, new_nodes = [], []
    for node, sources in m.add.items():
        if node == GLOBALS_NODE:
            raise MutationError("'@globals' entries are added through add_globals", "append_only")
        try:
            check_node_name(node)
        except GraphError as exc:
            raise MutationError(str(exc)) from exc
        if node in graph.inputs:
            raise MutationError(f"node name {node!r} shadows a dataset input")
        if node not in nodes:
            nodes[node] = []
            new_nodes.append(node)
        for i, src in enumerate(sources):
            try:
                alt = Alternative.create(node, f"{graph.id_prefix}{next_id}", src, parse(src))
            except DslError as exc:
                raise MutationError(f"add.{node}[{i}]: {exc}", "parse") from exc
            next_id += 1
            nodes[node].append(alt)
            added.append(alt)

    stats = dict(graph.stats)
    for alt in added:
        stats[alt.id] = AltStats()
    for rid in m.remove:
        stats.pop(rid, None)
    new = graph.replace(nodes={k: tuple(v) for k, v in nodes.items()}, globals=store,
                        version=graph.version + 1, next_id=next_id, stats=stats)
    problems = reference_problems(new, added)
    if problems:
        raise MutationError("; ".join(problems), "reference")
    cycle = new.find_cycle()
    if cycle:
        raise MutationError("cycle introduced: " + " -> ".join(cycle), "cycle")
    return AppliedMutation(new, tuple(a.id for a in added), tuple(m.remove), tuple(new_nodes),
                           tuple(m.add_globals))
