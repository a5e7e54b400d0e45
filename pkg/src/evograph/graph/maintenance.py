"""Graph maintenance and per-alternative statistics."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..dsl import Lambda, Name, Param, canonical_form, identity_source, to_source
from ..dsl.ast import CallableCall, transform
from .model import (OUTPUT, Alternative, AltStats, Configuration, EvoGraph, binds_by_name,
                    id_sort_key, node_kind, reference_problems)

IMPORTANCE_THRESHOLD = 1e-4
IMPORTANCE_WINDOW = 3


@dataclass
class MaintenanceLog:
    failed: list = field(default_factory=list)
    unreachable: list = field(default_factory=list)
    empty: list = field(default_factory=list)
    invalid: list = field(default_factory=list)
    duplicates: list = field(default_factory=list)
    inlined: list = field(default_factory=list)
    globals_dropped: list = field(default_factory=list)
    low_importance: list = field(default_factory=list)

    @property
    def changed(self) -> bool:
        return any(getattr(self, f) for f in self.__dataclass_fields__)

    def to_json(self) -> dict:
        return {k: list(v) for k, v in self.__dict__.items() if v}


def canonical_key(alt: Alternative) -> str:
    if binds_by_name(alt.node):
        return canonical_form(alt.body, rename_params=False)
    return canonical_form(alt.ast)


def _drop_alts(nodes: dict, ids: set) -> dict:
    return {n: tuple(a for a in alts if a.id not in ids) for n, alts in nodes.items()}


def _keep_output(nodes: dict, graph: EvoGraph, ids: set) -> set:
    """Never remove every output alternative: spare the oldest one."""
    outs = nodes.get(OUTPUT, ())
    if outs and all(a.id in ids for a in outs):
        keep = min(outs, key=lambda a: id_sort_key(a.id))
        ids = ids - {keep.id}
    return ids


def _rewire(alt: Alternative, old: str, new: str) -> Alternative:
    """Point references to node ``old`` at ``new`` (source text regenerated)."""
    ast = alt.ast

    def fn(n):
        if isinstance(n, Name) and n.id == old:
            return Name(new)
        if isinstance(n, CallableCall) and n.name == old:
            return CallableCall(new, n.args)
        if binds_by_name(alt.node) and isinstance(n, Param) and n.id == old:
            return Param(new)
        return n

    body = transform(ast.body, fn)
    params = ast.params
    if binds_by_name(alt.node) and old in params:
        seen, renamed = set(), []
        for p in params:
            p = new if p == old else p
            if p not in seen:
                seen.add(p)
                renamed.append(p)
        params = tuple(renamed)
    new_ast = Lambda(params, body)
    return Alternative.create(alt.node, alt.id, to_source(new_ast), new_ast)


def _one_pass(graph: EvoGraph, failed_ids: set, log: MaintenanceLog) -> EvoGraph:
    nodes = dict(graph.nodes)

    # (1) alternatives that failed in every configuration they were evaluated in
    doomed = _keep_output(nodes, graph, {i for i in failed_ids if i in graph.alt_index})
    if doomed:
        log.failed.extend(sorted(doomed, key=id_sort_key))
        nodes = _drop_alts(nodes, doomed)
        graph = graph.replace(nodes=nodes)

    # (2) unreachable nodes
    reach = graph.reachable()
    gone = [n for n in nodes if n not in reach]
    if gone:
        log.unreachable.extend(gone)
        nodes = {n: a for n, a in nodes.items() if n in reach}
        graph = graph.replace(nodes=nodes)

    # (3) empty nodes; then alternatives left with dangling references
    empty = [n for n, a in nodes.items() if not a and n != OUTPUT]
    if empty:
        log.empty.extend(empty)
        nodes = {n: a for n, a in nodes.items() if n not in empty}
        graph = graph.replace(nodes=nodes)
    bad = {a.id for a in graph.alt_index.values() if reference_problems(graph, [a])}
    bad = _keep_output(nodes, graph, bad)
    if bad:
        log.invalid.extend(sorted(bad, key=id_sort_key))
        nodes = _drop_alts(nodes, bad)
        graph = graph.replace(nodes=nodes)

    # (4) duplicates within a node: keep more evaluations, then the lower id
    dup = set()
    for n, alts in nodes.items():
        groups: dict = {}
        for a in alts:
            groups.setdefault(canonical_key(a), []).append(a)
        for members in groups.values():
            if len(members) > 1:
                keep = min(members, key=lambda a: (-graph.stats_for(a.id).n_evals, id_sort_key(a.id)))
                dup.update(a.id for a in members if a is not keep)
    if dup:
        log.duplicates.extend(sorted(dup, key=id_sort_key))
        nodes = _drop_alts(nodes, dup)
        graph = graph.replace(nodes=nodes)

    # (5) single-alternative identity intermediates are inlined
    for n in sorted(nodes):
        alts = nodes.get(n)
        if node_kind(n) != "intermediate" or not alts or len(alts) != 1:
            continue
        src = identity_source(alts[0].body)
        if src is None or src == n:
            continue
        log.inlined.append(f"{n}->{src}")
        rewired = {}
        for m, malts in nodes.items():
            if m == n:
                continue
            rewired[m] = tuple(_rewire(a, n, src) if n in graph.deps(a).upstream else a
                               for a in malts)
        nodes = rewired  # n itself is dropped: nothing references it any more
        graph = graph.replace(nodes=nodes)

    # (6) globals no reachable alternative reads
    used = set()
    for a in graph.alt_index.values():
        used |= graph.deps(a).globals
    unused = [k for k in graph.globals.names if k not in used]
    if unused:
        log.globals_dropped.extend(unused)
        graph = graph.replace(globals=graph.globals.drop(unused))

    # (7) outputs with persistently negligible importance
    low = {a.id for a in nodes.get(OUTPUT, ())
           if graph.stats_for(a.id).low_imp_streak >= IMPORTANCE_WINDOW}
    low = _keep_output(nodes, graph, low)
    if low:
        log.low_importance.extend(sorted(low, key=id_sort_key))
        nodes = _drop_alts(nodes, low)
        graph = graph.replace(nodes=nodes)
    return graph


def maintain(graph: EvoGraph, failed_ids=(), max_passes: int = 10) -> tuple[EvoGraph, MaintenanceLog]:
    """Prune and simplify to a fixed point; returns ``graph`` itself if nothing changes.

    ``failed_ids`` are alternatives that failed in every configuration they
    took part in during the latest evaluation.
    """
    log = MaintenanceLog()
    current = graph
    failed = set(failed_ids)
    for _ in range(max_passes):
        before = _signature(current)
        current = _one_pass(current, failed, log)
        failed = set()
        if _signature(current) == before:
            break
    if not log.changed:
        return graph, log
    alive = set(current.alt_index)
    stats = {k: v for k, v in current.stats.items() if k in alive}
    return current.replace(stats=stats, version=graph.version + 1), log


def _signature(graph: EvoGraph) -> tuple:
    return (tuple((n, tuple((a.id, a.source) for a in alts)) for n, alts in graph.nodes.items()),
            graph.globals.names)


# --- statistics --------------------------------------------------------------


def record_result(graph: EvoGraph, participation: list, failures_by_alt: dict | None = None,
                  incumbent: Configuration | None = None) -> EvoGraph:
    """Fold one evaluation into the per-alternative statistics.

    ``participation`` lists ``(score, alt ids used)`` per successfully scored
    configuration. Every alternative ages by one step.
    """
    stats = {}
    scores: dict = {}
    for score, ids in participation:
        for i in ids:
            scores.setdefault(i, []).append(score)
    failures_by_alt = failures_by_alt or {}
    for alt_id in graph.alt_index:
        st = graph.stats_for(alt_id)
        obs = scores.get(alt_id, [])
        n = st.n_evals
        best, mean = st.best_config_score, st.mean_config_score
        for s in obs:
            n += 1
            best = s if best is None else max(best, s)
            mean = s if mean is None else mean + (s - mean) / n
        stats[alt_id] = replace(st, age=st.age + 1, n_evals=n, best_config_score=best,
                                mean_config_score=mean,
                                n_runtime_failures=st.n_runtime_failures + failures_by_alt.get(alt_id, 0))
    fields = {"stats": stats}
    if incumbent is not None:
        fields["incumbent"] = incumbent
    return graph.replace(**fields)


def update_importance_streaks(graph: EvoGraph, importance_by_alt: dict,
                              threshold: float = IMPORTANCE_THRESHOLD) -> EvoGraph:
    """Advance or reset the low-importance streak of each scored output."""
    stats = dict(graph.stats)
    for alt in graph.alternatives(OUTPUT):
        if alt.id not in importance_by_alt:
            continue
        st = graph.stats_for(alt.id)
        streak = st.low_imp_streak + 1 if importance_by_alt[alt.id] < threshold else 0
        stats[alt.id] = replace(st, low_imp_streak=streak)
    return graph.replace(stats=stats)
