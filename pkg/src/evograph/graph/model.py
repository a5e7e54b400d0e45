"""The multi-alternative computation graph."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import cached_property

from ..dsl import (DependencySet, DslError, Lambda, bind_by_name, dependencies, parse,
                   positional_params)
from ..tensor.globals_store import GlobalsStore

GLOBALS_NODE = "@globals"
OUTPUT = "output"
RIDGE_W = "ridge_w"
RIDGE_G = "ridge_g"
FITTING = (RIDGE_W, RIDGE_G)
ROOTS = (OUTPUT, RIDGE_W, RIDGE_G)

_NODE_NAME = re.compile(r"@?[A-Za-z_][A-Za-z0-9_]*\Z")


class GraphError(ValueError):
    pass


def node_kind(name: str) -> str:
    if name == GLOBALS_NODE:
        return "globals"
    if name.startswith("@"):
        return "callable"
    if name == OUTPUT:
        return "output"
    if name == RIDGE_W:
        return "fitting:ridge_w"
    if name == RIDGE_G:
        return "fitting:ridge_g"
    return "intermediate"


def binds_by_name(node: str) -> bool:
    """Whether lambda parameters of this node's alternatives name their inputs."""
    return node_kind(node) in ("intermediate", "output", "fitting:ridge_w")


def id_sort_key(alt_id: str) -> tuple:
    """Order ids by allocation counter, then by prefix (island)."""
    m = re.match(r"(.*?)(\d+)\Z", alt_id)
    if not m:
        return (float("inf"), alt_id)
    return (int(m.group(2)), m.group(1))


def check_node_name(name: str):
    if not _NODE_NAME.match(name) or name in ("lambda", "globals"):
        raise GraphError(f"invalid node name {name!r}")


@dataclass(frozen=True)
class Alternative:
    id: str
    node: str
    source: str
    ast: Lambda
    body: Lambda  # evaluation form: parameters resolved by name where applicable

    @classmethod
    def create(cls, node: str, alt_id: str, source: str, ast: Lambda | None = None) -> "Alternative":
        ast = ast if ast is not None else parse(source)
        kind = node_kind(node)
        if kind == "fitting:ridge_g" and len(positional_params(ast)) != 1:
            raise DslError(f"ridge_g alternatives take exactly one residual parameter: {source!r}")
        body = bind_by_name(ast) if binds_by_name(node) else ast
        return cls(alt_id, node, source, ast, body)


@dataclass(frozen=True)
class AltStats:
    age: int = 0
    n_evals: int = 0
    best_config_score: float | None = None
    mean_config_score: float | None = None
    n_runtime_failures: int = 0
    low_imp_streak: int = 0

    def to_json(self) -> dict:
        return {"age": self.age, "n_evals": self.n_evals, "best": self.best_config_score,
                "mean": self.mean_config_score, "failures": self.n_runtime_failures,
                "low_imp_streak": self.low_imp_streak}

    @classmethod
    def from_json(cls, d: dict) -> "AltStats":
        return cls(d["age"], d["n_evals"], d["best"], d["mean"], d["failures"], d.get("low_imp_streak", 0))


@dataclass(frozen=True)
class Configuration:
    """One selected alternative id per multi-alternative reachable node."""

    items: tuple = ()

    @classmethod
    def of(cls, selection: dict) -> "Configuration":
        return cls(tuple(sorted(selection.items())))

    @property
    def selection(self) -> dict:
        return dict(self.items)

    def get(self, node, default=None):
        for k, v in self.items:
            if k == node:
                return v
        return default

    def to_json(self) -> dict:
        return dict(self.items)


@dataclass(frozen=True, eq=False)
class EvoGraph:
    """Immutable snapshot of the graph; modifiers return new instances.

    ``nodes`` maps node name to a tuple of alternatives in insertion order (the
    ``@globals`` node lives in ``globals`` instead). ``stats`` is keyed by
    alternative id.
    """

    nodes: dict
    globals: GlobalsStore
    inputs: frozenset
    version: int = 0
    stats: dict = field(default_factory=dict)
    next_id: int = 0
    id_prefix: str = "a"
    incumbent: Configuration | None = None  # best configuration from the last scoring

    # --- lookups ------------------------------------------------------------

    @cached_property
    def alt_index(self) -> dict:
        return {a.id: a for alts in self.nodes.values() for a in alts}

    @cached_property
    def _deps(self) -> dict:
        return {a.id: dependencies(a.body, self.inputs) for a in self.alt_index.values()}

    def deps(self, alt: Alternative | str) -> DependencySet:
        return self._deps[alt if isinstance(alt, str) else alt.id]

    def alternatives(self, node: str) -> tuple:
        return self.nodes.get(node, ())

    def node_upstream(self, node: str) -> frozenset:
        """Nodes read by any alternative of ``node``."""
        out = set()
        for a in self.alternatives(node):
            out |= self.deps(a).upstream
        return frozenset(out)

    def stats_for(self, alt_id: str) -> AltStats:
        return self.stats.get(alt_id, AltStats())

    @property
    def total_alternatives(self) -> int:
        return sum(len(v) for v in self.nodes.values())

    def replace(self, **changes) -> "EvoGraph":
        return replace(self, **changes)

    def with_globals(self, store: GlobalsStore) -> "EvoGraph":
        return replace(self, globals=store)

    def rebased(self, id_prefix: str, next_id: int) -> "EvoGraph":
        """Same graph, allocating future alternative ids from another sequence."""
        return replace(self, id_prefix=id_prefix, next_id=next_id)

    def allocate_ids(self, count: int) -> tuple[list, int]:
        ids = [f"{self.id_prefix}{self.next_id + i}" for i in range(count)]
        return ids, self.next_id + count

    # --- structure ----------------------------------------------------------

    def reachable(self) -> frozenset:
        """Dependency closure of ``output``, ``ridge_w`` and ``ridge_g``."""
        frontier = [r for r in ROOTS if r in self.nodes]
        seen = set(frontier)
        while frontier:
            node = frontier.pop()
            for up in self.node_upstream(node):
                if up in self.nodes and up not in seen:
                    seen.add(up)
                    frontier.append(up)
        return frozenset(seen)

    def config_nodes(self) -> list:
        """Sorted multi-alternative reachable nodes (the configuration axes)."""
        reach = self.reachable()
        return sorted(n for n in reach if n != OUTPUT and len(self.nodes[n]) >= 2)

    def selected(self, node: str, config: Configuration) -> Alternative:
        alts = self.nodes.get(node)
        if not alts:
            raise GraphError(f"node {node!r} has no alternatives")
        if len(alts) == 1:
            return alts[0]
        chosen = config.get(node)
        if chosen is None:
            return alts[0]
        for a in alts:
            if a.id == chosen:
                return a
        raise GraphError(f"configuration selects unknown alternative {chosen!r} for {node!r}")

    def find_cycle(self) -> list | None:
        """Return a dependency cycle as a node list, or None if acyclic."""
        color: dict = {}
        path: list = []

        def visit(n):
            color[n] = 1
            path.append(n)
            for up in sorted(self.node_upstream(n)):
                if up not in self.nodes:
                    continue
                c = color.get(up, 0)
                if c == 1:
                    return path[path.index(up):] + [up]
                if c == 0:
                    found = visit(up)
                    if found:
                        return found
            color[n] = 2
            path.pop()
            return None

        for n in sorted(self.nodes):
            if color.get(n, 0) == 0:
                found = visit(n)
                if found:
                    return found
        return None

    def depth(self, node: str, config: Configuration | None = None, _memo=None) -> int:
        """Longest dependency chain from the inputs (inputs have depth 0).

        With a configuration, only the selected alternative of each node counts;
        without one, the maximum over all alternatives is used.
        """
        memo = {} if _memo is None else _memo
        if node in memo:
            return memo[node]
        if node not in self.nodes:
            return 0
        alts = [self.selected(node, config)] if config is not None and self.nodes[node] else self.nodes[node]
        best = 0
        for a in alts:
            for up in self.deps(a).upstream:
                best = max(best, self.depth(up, config, memo))
        memo[node] = best + 1
        return memo[node]

    def alt_depth(self, alt: Alternative, config: Configuration | None = None) -> int:
        memo: dict = {}
        ups = self.deps(alt).upstream
        return 1 + max((self.depth(u, config, memo) for u in ups), default=0)

    def max_depth(self) -> int:
        memo: dict = {}
        return max((self.depth(n, None, memo) for n in self.reachable()), default=0)

    def closure(self, alt: Alternative, config: Configuration) -> list:
        """Alternatives transitively used when evaluating ``alt`` under ``config``."""
        out, stack, seen = [], [alt], {alt.id}
        while stack:
            a = stack.pop()
            out.append(a)
            for up in self.deps(a).upstream:
                if up not in self.nodes or not self.nodes[up]:
                    continue
                s = self.selected(up, config)
                if s.id not in seen:
                    seen.add(s.id)
                    stack.append(s)
        return out


def reference_problems(graph: EvoGraph, alts=None) -> list:
    """Unresolvable references in ``alts`` (default: every alternative)."""
    problems = []
    for alt in (graph.alt_index.values() if alts is None else alts):
        deps = graph.deps(alt)
        for name in sorted(deps.nodes):
            if name not in graph.nodes:
                problems.append(f"{alt.node} ({alt.id}): unresolvable identifier {name!r}")
            elif name.startswith("@") or name == RIDGE_G:
                problems.append(f"{alt.node} ({alt.id}): function node {name!r} used as a value")
        for name in sorted(deps.callables):
            if name == GLOBALS_NODE or name not in graph.nodes:
                problems.append(f"{alt.node} ({alt.id}): unknown callable {name!r}")
        for key in sorted(deps.globals):
            if key not in graph.globals:
                problems.append(f"{alt.node} ({alt.id}): unknown globals entry {key!r}")
        if alt.node in deps.upstream:
            problems.append(f"{alt.node} ({alt.id}): references its own node")
    return problems
