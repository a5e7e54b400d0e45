"""One island step: propose, apply, score, accept or salvage, maintain, log."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..diagnostics import build_diagnostics
from ..graph.io import dump_graph
from ..graph.maintenance import maintain, record_result, update_importance_streaks
from ..graph.model import EvoGraph
from ..graph.mutation import MutationError, MutationSet, apply_mutation, parse_mutation
from ..scorer.pipeline import ScorerConfig, ScoringError, score_graph
from .memorandum import Memorandum, outcome_line, template_update, validate_memorandum
from .prompts import engineer_prompt, memorandum_prompt, scientist_prompt
from .providers import ProviderError

RECENT_ERRORS = 8
TOON_FEATURE_ROWS = 60
TOON_SUBNODE_ROWS = 60


@dataclass
class IslandState:
    id: int
    temperature: float
    graph: EvoGraph
    score: float
    rng: np.random.Generator
    memo: Memorandum = field(default_factory=Memorandum)
    toon: str = ""
    context: dict = field(default_factory=dict)
    step: int = 0  # steps taken by this island
    best: float = -np.inf  # best-so-far incumbent score
    recent_errors: list = field(default_factory=list)
    task_context: str = ""


@dataclass
class StepOutcome:
    status: str  # accepted | rejected | failed
    score_before: float
    score_after: float | None  # the candidate's score; None if it never scored
    incumbent_score: float  # island score after the step
    mutation: dict = field(default_factory=dict)
    salvage: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    failure_kind: str = ""
    phase1: dict = field(default_factory=dict)
    maintenance: dict = field(default_factory=dict)
    graph_version: int = 0
    n_alternatives: int = 0
    context: dict = field(default_factory=dict)

    def describe(self) -> str:
        if self.status == "failed":
            return f"{self.failure_kind or 'step'} failure: {self.errors[0] if self.errors else ''}".strip()
        m = self.mutation
        parts = []
        if m.get("add"):
            parts.append("added " + ", ".join(f"{n} x{k}" for n, k in m["add"].items()))
        if m.get("remove"):
            parts.append(f"removed {len(m['remove'])}")
        if m.get("add_globals"):
            parts.append("globals " + ", ".join(m["add_globals"]))
        return "; ".join(parts) or "no-op mutation"

    def to_json(self) -> dict:
        return {"status": self.status, "score_before": self.score_before,
                "score_after": self.score_after, "incumbent_score": self.incumbent_score,
                "outcome": outcome_line(self.status, self.score_before, self.score_after),
                "mutation": self.mutation, "salvage": self.salvage, "errors": self.errors,
                "failure_kind": self.failure_kind, "phase1": self.phase1,
                "maintenance": self.maintenance, "graph_version": self.graph_version,
                "n_alternatives": self.n_alternatives, "context": self.context}


def _no_log(kind: str, payload: dict) -> None:
    pass


def importance_by_alt(bundle) -> dict:
    """Summed feature importance per output alternative."""
    out: dict = {}
    for f in bundle.features:
        alt = f.name.split("[", 1)[0]
        out[alt] = out.get(alt, 0.0) + f.imp
    return out


def settle(graph: EvoGraph, report, dataset, sc: ScorerConfig):
    """Fold a report into the graph statistics, maintain, and rescore if needed.

    Returns ``(graph, report, bundle, maintenance log)``. A maintained graph is
    kept only if it scores at least as well as before maintenance.
    """
    scored = record_result(report.graph, report.participation(), report.failures_by_alt(),
                           report.best.config)
    bundle = build_diagnostics(report, dataset, sc, scored)
    scored = update_importance_streaks(scored, importance_by_alt(bundle))
    maintained, log = maintain(scored, report.failed_everywhere())
    if maintained is scored:
        return scored, report, bundle, log
    try:
        again = score_graph(maintained, dataset, sc, phase1_iters=0)
    except ScoringError:
        return scored, report, bundle, log
    if again.best_score < report.best_score:
        return scored, report, bundle, log
    maintained = maintained.replace(incumbent=again.best.config)
    return maintained, again, build_diagnostics(again, dataset, sc, maintained), log


def refresh_view(state: IslandState, bundle) -> None:
    state.context = bundle.context
    state.toon = bundle.toon(TOON_FEATURE_ROWS, TOON_SUBNODE_ROWS)


def initialize(state_id: int, temperature: float, graph: EvoGraph, dataset, sc: ScorerConfig,
               rng: np.random.Generator, task_context: str = "") -> tuple[IslandState, dict]:
    """Cold-start an island: full Phase-1 budget, then settle the seed graph."""
    report = score_graph(graph, dataset, sc, phase1_iters=sc.phase1_cold_iters, rng=rng)
    settled, report, bundle, log = settle(graph, report, dataset, sc)
    state = IslandState(state_id, temperature, settled, report.best_score, rng,
                        task_context=task_context)
    state.best = report.best_score
    refresh_view(state, bundle)
    payload = {"score": report.best_score, "phase1": report.phase1.to_json(),
               "maintenance": log.to_json(), "graph_version": settled.version,
               "n_alternatives": settled.total_alternatives, "context": bundle.context,
               "failures": [{"alt": a, "config": i, "error": m} for a, i, m in report.failures]}
    return state, payload


def _graft_unit(candidate: EvoGraph, incumbent: EvoGraph, alt_id: str, added: set) -> list:
    """``alt_id`` plus the added alternatives of new nodes it depends on."""
    unit, stack, seen = [], [alt_id], set()
    while stack:
        aid = stack.pop()
        if aid in seen:
            continue
        seen.add(aid)
        unit.append(aid)
        for up in candidate.deps(aid).upstream:
            if up not in incumbent.nodes and up in candidate.nodes:
                stack.extend(a.id for a in candidate.alternatives(up) if a.id in added)
    return unit


def _graft(base: EvoGraph, candidate: EvoGraph, unit: list) -> EvoGraph:
    """Add the alternatives in ``unit`` (and the globals they read) to ``base``."""
    index = candidate.alt_index
    add: dict = {}
    for aid in sorted(unit, key=list(index).index):
        alt = index[aid]
        add.setdefault(alt.node, []).append(alt.source)
    needed = set()
    for aid in unit:
        needed |= candidate.deps(aid).globals
    new_globals = {k: candidate.globals[k].init for k in candidate.globals.names
                   if k in needed and k not in base.globals}
    applied = apply_mutation(base, MutationSet((), {k: tuple(v) for k, v in add.items()}, new_globals))
    graph = applied.graph
    if new_globals:
        # reuse the values the candidate trained instead of fresh initialisations
        graph = graph.with_globals(graph.globals.with_values(
            {k: candidate.globals[k].value for k in new_globals},
            trained=any(candidate.globals[k].trained for k in new_globals)))
    return graph


def salvage(incumbent: EvoGraph, incumbent_score: float, candidate: EvoGraph, added, dataset,
            sc: ScorerConfig) -> tuple[EvoGraph, float, object, dict]:
    """Graft individually beneficial alternatives of a rejected candidate.

    Each added alternative (with any new nodes it needs) is grafted alone onto
    the incumbent and scored with frozen globals. Grafts that strictly beat the
    incumbent are then applied cumulatively, best first, keeping each only if
    the running score does not drop.
    """
    added = [a for a in added if a in candidate.alt_index]
    summary = {"tried": [], "gains": {}, "kept": [], "errors": {}}
    units, seen_units = [], set()
    for aid in added:
        unit = _graft_unit(candidate, incumbent, aid, set(added))
        key = frozenset(unit)
        if key in seen_units:
            continue
        seen_units.add(key)
        units.append((aid, unit))
    gains = []
    for aid, unit in units:
        summary["tried"].append(aid)
        try:
            trial = _graft(incumbent, candidate, unit)
            rep = score_graph(trial, dataset, sc, phase1_iters=0)
        except (MutationError, ScoringError) as exc:
            summary["errors"][aid] = str(exc)
            continue
        gain = rep.best_score - incumbent_score
        summary["gains"][aid] = gain
        if gain > 0:
            gains.append((-gain, len(gains), aid, unit))
    gains.sort()
    graph, score, report = incumbent, incumbent_score, None
    for _, _, aid, unit in gains:
        try:
            trial = _graft(graph, candidate, unit)
            rep = score_graph(trial, dataset, sc, phase1_iters=0)
        except (MutationError, ScoringError) as exc:
            summary["errors"][aid] = str(exc)
            continue
        if rep.best_score >= score and rep.best_score > incumbent_score:
            graph, score, report = trial, rep.best_score, rep
            summary["kept"].append(aid)
    summary["score"] = score
    return graph, score, report, summary


def _call(log, kind: str, prompt, fn):
    log("provider_request", {"call": kind, "request": prompt.to_json()})
    text = fn(prompt)
    log("provider_response", {"call": kind, "text": text})
    return text


def step(state: IslandState, provider, dataset, sc: ScorerConfig | None = None,
         log=_no_log) -> StepOutcome:
    """Advance ``state`` by one proposal; mutates ``state`` in place."""
    sc = sc or ScorerConfig()
    before = state.score
    graph = state.graph
    annotated = dump_graph(graph, annotate=True)
    state.step += 1

    def finish(outcome: StepOutcome, toon_for_memo: str) -> StepOutcome:
        outcome.graph_version = state.graph.version
        outcome.n_alternatives = state.graph.total_alternatives
        outcome.context = state.context
        if outcome.errors:
            state.recent_errors = (state.recent_errors + outcome.errors)[-RECENT_ERRORS:]
        _update_memo(state, provider, outcome, toon_for_memo, log)
        state.best = max(state.best, state.score)
        return outcome

    try:
        hypotheses = _call(log, "scientist",
                           scientist_prompt(state.task_context, annotated, state.toon, state.memo.text),
                           provider.scientist)
        text = _call(log, "engineer",
                     engineer_prompt(annotated, hypotheses, state.recent_errors), provider.engineer)
    except ProviderError as exc:
        log("provider_error", {"error": str(exc)})
        return finish(StepOutcome("failed", before, None, before, errors=[f"provider: {exc}"],
                                  failure_kind="provider"), state.toon)

    try:
        mutation = parse_mutation(text)
        applied = apply_mutation(graph, mutation)
    except MutationError as exc:
        return finish(StepOutcome("failed", before, None, before, errors=[f"mutation ({exc.kind}): {exc}"],
                                  failure_kind="mutation"), state.toon)

    summary = mutation.summary()
    summary["added_ids"] = list(applied.added)
    try:
        # a no-op re-scores the incumbent as is, so it ties (or finds a better sampled config)
        iters = 0 if mutation.is_noop else sc.phase1_iters
        report = score_graph(applied.graph, dataset, sc, phase1_iters=iters, rng=state.rng)
    except ScoringError as exc:
        errors = [f"runtime: {exc}"] + _alt_errors(exc.failures, applied.added)
        return finish(StepOutcome("failed", before, None, before, summary, errors=errors,
                                  failure_kind="runtime",
                                  phase1=exc.phase1.to_json() if exc.phase1 else {}), state.toon)

    errors = _alt_errors(report.failures, applied.added)
    after = report.best_score
    if after >= before:
        settled, final, bundle, mlog = settle(applied.graph, report, dataset, sc)
        state.graph, state.score = settled, final.best_score
        refresh_view(state, bundle)
        outcome = StepOutcome("accepted", before, after, state.score, summary, errors=errors,
                              phase1=report.phase1.to_json(), maintenance=mlog.to_json())
        return finish(outcome, state.toon)

    salvaged, score, srep, ssum = salvage(graph, before, report.graph, applied.added, dataset, sc)
    maint = {}
    if srep is not None:
        settled, final, bundle, mlog = settle(salvaged, srep, dataset, sc)
        state.graph, state.score = settled, max(final.best_score, score)
        refresh_view(state, bundle)
        maint = mlog.to_json()
    outcome = StepOutcome("rejected", before, after, state.score, summary, ssum, errors,
                          phase1=report.phase1.to_json(), maintenance=maint)
    return finish(outcome, state.toon)


def _alt_errors(failures, added) -> list:
    """One line per failing alternative introduced by this mutation."""
    added = set(added)
    seen, out = set(), []
    for alt, _, msg in failures:
        if alt in added and alt not in seen:
            seen.add(alt)
            out.append(f"{alt}: {msg}")
    return out


def _update_memo(state: IslandState, provider, outcome: StepOutcome, toon: str, log) -> None:
    fallback = template_update(state.memo, outcome, state.context, max(state.best, state.score))
    line = outcome_line(outcome.status, outcome.score_before, outcome.score_after)
    details = "\n".join([line, outcome.describe()] + outcome.errors)
    try:
        text = _call(log, "memorandum", memorandum_prompt(state.memo.text, details, toon),
                     provider.memorandum)
    except ProviderError as exc:
        log("provider_error", {"error": str(exc)})
        text = None
    if text is None:
        state.memo = fallback
        return
    memo, problems = validate_memorandum(text, fallback)
    for p in problems:
        log("memorandum_warning", {"problem": p})
    state.memo = memo
