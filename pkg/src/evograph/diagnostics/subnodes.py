"""Aggregates of output diagnostics over the intermediate and callable
alternatives they depend on."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..graph.model import OUTPUT, node_kind


@dataclass
class SubnodeDiag:
    name: str
    depth: int
    n_deps: int
    bttlnk: bool
    n_paths: int
    cfg_auc_max: float
    qi_max: float  # best gap of a containing config over the mean config AUC
    qd_max: float  # best configuration score on record for the alternative
    imp_max: float
    ind_auc_max: float
    resid_max: float
    alt_id: str = ""

    def to_json(self) -> dict:
        return asdict(self)


def subnode_name(graph, alt) -> str:
    return alt.node if len(graph.alternatives(alt.node)) == 1 else f"{alt.node}:{alt.id}"


def toon_depth(graph, alt, config=None) -> int:
    """Node levels beneath ``alt``: zero when it reads only inputs and globals."""
    return graph.alt_depth(alt, config) - 1


def _ancestors(graph) -> dict:
    """Nodes reachable upstream of each node, over all alternatives."""
    memo: dict = {}

    def visit(node, trail=()):
        if node in memo:
            return memo[node]
        out = set()
        for up in graph.node_upstream(node):
            if up in graph.nodes and up not in trail:
                out.add(up)
                out |= visit(up, trail + (node,))
        memo[node] = frozenset(out)
        return memo[node]

    for node in graph.nodes:
        visit(node)
    return memo


def _bottlenecks(graph) -> set:
    """Nodes every output alternative depends on."""
    outputs = graph.alternatives(OUTPUT)
    if not outputs:
        return set()
    anc = _ancestors(graph)
    common = None
    for alt in outputs:
        ups = set()
        for u in graph.deps(alt).upstream:
            if u in graph.nodes:
                ups |= {u} | anc[u]
        common = ups if common is None else common & ups
    return common or set()


def subnode_aggregates(graph, report, stats_graph=None) -> list:
    """One record per intermediate or callable alternative used by a scored column."""
    stats_graph = stats_graph or graph
    scored = report.scored
    mean_auc = float(np.mean([c.mean_auc for c in scored])) if scored else 0.0
    acc: dict = {}
    closures: dict = {}
    for cfg in scored:
        for col, owner in zip(cfg.columns, cfg.owners):
            key = (owner, cfg.config)
            if key not in closures:
                alt = graph.alt_index[owner]
                closures[key] = [a.id for a in graph.closure(alt, cfg.config)
                                 if node_kind(a.node) in ("intermediate", "callable")]
            stats = cfg.column_stats.get(col, {})
            for alt_id in closures[key]:
                a = acc.setdefault(alt_id, {"n_paths": 0, "cfg": -np.inf, "qi": -np.inf,
                                            "imp": 0.0, "ind": 0.0, "resid": 0.0})
                a["n_paths"] += 1
                a["cfg"] = max(a["cfg"], cfg.mean_auc)
                a["qi"] = max(a["qi"], cfg.mean_auc - mean_auc)
                a["imp"] = max(a["imp"], stats.get("imp", 0.0))
                a["ind"] = max(a["ind"], stats.get("ind_auc", 0.0))
                a["resid"] = max(a["resid"], abs(stats.get("resid_sq", 0.0)))
    bottlenecks = _bottlenecks(graph)
    out = []
    for node, alts in graph.nodes.items():
        for alt in alts:
            a = acc.get(alt.id)
            if a is None:
                continue
            best = stats_graph.stats_for(alt.id).best_config_score
            out.append(SubnodeDiag(
                name=subnode_name(graph, alt),
                depth=toon_depth(graph, alt),
                n_deps=len([u for u in graph.deps(alt).upstream if u in graph.nodes]),
                bttlnk=node in bottlenecks,
                n_paths=a["n_paths"],
                cfg_auc_max=float(a["cfg"]),
                qi_max=float(a["qi"]),
                qd_max=float(a["cfg"] if best is None else max(best, a["cfg"])),
                imp_max=float(a["imp"]),
                ind_auc_max=float(a["ind"]),
                resid_max=float(a["resid"]),
                alt_id=alt.id,
            ))
    return out
