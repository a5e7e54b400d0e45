"""Command-line entry point: ``evograph <command> ...``.

Every command writes JSON to stdout. Failures print
``{"error": {"type": ..., "message": ...}}`` and exit with status 1.

Remote provider settings come from the environment:
EVOGRAPH_PROVIDER_URL (endpoint), EVOGRAPH_PROVIDER_MODEL and
EVOGRAPH_PROVIDER_KEY (sent as a bearer token).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import yaml

from .diagnostics import ToonFormatError, build_diagnostics, parse_toon
from .dsl import DslError, bind_by_name, dependencies, parse
from .evolution.providers import ENV_KEY, ENV_MODEL, ENV_URL, ProviderError, TranscriptError, parse_transcript
from .graph.io import GraphFormatError, load_graph, parse_graph_document
from .graph.model import binds_by_name, reference_problems
from .graph.mutation import MutationError, parse_mutation
from .runtime.checkpoint import CheckpointError
from .runtime.config import ConfigError, load_run_config
from .runtime.events import _plain, read_events
from .runtime.islands import Run
from .scorer.pipeline import ScorerConfig, ScoringError, score_graph
from .synth import synth_dataset
from .tensor.dataset import DatasetError, load_dataset, read_manifest, save_dataset

EXPECTED_ERRORS = (ConfigError, DatasetError, GraphFormatError, MutationError, ToonFormatError,
                   TranscriptError, ProviderError, CheckpointError, ScoringError, DslError,
                   OSError, ValueError)


class CommandError(Exception):
    pass


def _emit(obj) -> None:
    print(json.dumps(_plain(obj), indent=2, sort_keys=False))


# --- synth-dataset -------------------------------------------------------------


def cmd_synth_dataset(args) -> dict:
    ds, meta = synth_dataset(args.n_series, args.length, args.break_fraction, args.seed,
                             args.magnitude)
    path = save_dataset(ds, args.out, meta)
    return {"manifest": str(path), **meta}


# --- run -------------------------------------------------------------------------


def cmd_run(args) -> dict:
    if args.resume:
        run = Run.restore(args.resume)
    else:
        config = load_run_config(args.config)
        run = Run.start(config)
    summary = run.run(until=args.until)
    return {"out": run.config.out, **summary}


# --- eval ------------------------------------------------------------------------


def cmd_eval(args) -> dict:
    dataset = load_dataset(args.dataset)
    graph = load_graph(Path(args.graph).read_text(), dataset.input_names, seed=args.seed)
    overrides = {}
    if args.folds is not None:
        overrides["n_folds"] = args.folds
    if args.cap is not None:
        overrides["config_cap"] = args.cap
    sc = ScorerConfig.from_json(overrides)
    iters = sc.phase1_cold_iters if args.phase1_iters is None else args.phase1_iters
    report = score_graph(graph, dataset, sc, phase1_iters=iters)
    out = report.to_json()
    bundle = build_diagnostics(report, dataset, sc)
    out["diagnostics"] = bundle.to_json()
    if args.toon:
        out["toon"] = bundle.toon()
    return out


# --- report ----------------------------------------------------------------------


def milestones(events: list) -> list:
    """Global-best rows ``{version, step, island, auc, delta}`` from an event log."""
    rows, prev = [], None
    for ev in events:
        if ev["type"] != "global_best":
            continue
        auc = ev["payload"]["auc"]
        rows.append({"version": ev["payload"]["version"], "step": ev["step"],
                     "island": ev["island"], "auc": auc,
                     "delta": None if prev is None else auc - prev})
        prev = auc
    return rows


def cmd_report(args) -> dict | str:
    rows = milestones(read_events(args.events))
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, ["version", "step", "island", "auc", "delta"], lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({**r, "delta": "" if r["delta"] is None else r["delta"]})
        return buf.getvalue()
    return {"milestones": rows,
            "total_gain": (rows[-1]["auc"] - rows[0]["auc"]) if rows else 0.0}


# --- validate --------------------------------------------------------------------


def infer_inputs(text: str) -> list:
    """Bare names a graph file reads that no node defines."""
    _, nodes = parse_graph_document(text)
    found = set()
    for node, sources in nodes.items():
        for i, src in enumerate(sources):
            try:
                ast = parse(src)
            except DslError as exc:
                raise GraphFormatError(f"{node}[{i}]: {exc}") from exc
            if binds_by_name(node):
                ast = bind_by_name(ast)
            found |= set(dependencies(ast).nodes)
    return sorted(found - set(nodes))


def detect_kind(path: Path) -> str:
    if path.is_dir() or path.suffix == ".json" and path.name.startswith("manifest"):
        return "dataset"
    text = path.read_text()
    if text.lstrip().startswith("context:"):
        return "toon"
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError:
        return "graph"
    if isinstance(doc, dict):
        keys = set(doc)
        if "tensors" in keys:
            return "dataset"
        if keys and keys <= {"remove", "add", "add_globals"}:
            return "mutation"
        if keys and keys <= {"task_context", "steps", "islands"}:
            return "transcript"
        if {"dataset", "graph"} <= keys:
            return "config"
    return "graph"


def cmd_validate(args) -> dict:
    path = Path(args.file)
    if not path.exists():
        raise CommandError(f"no such file: {path}")
    kind = args.kind or detect_kind(path)
    info: dict = {"file": str(path), "kind": kind, "ok": True}
    if kind == "graph":
        text = path.read_text()
        if args.dataset:
            inputs = list(read_manifest(args.dataset)["tensors"])
            inputs.remove("label")
        else:
            inputs = infer_inputs(text)
            info["assumed_inputs"] = inputs
        graph = load_graph(text, inputs, check_references=False)
        problems = reference_problems(graph)
        if problems:
            raise GraphFormatError("; ".join(problems))
        info.update(nodes=len(graph.nodes), alternatives=graph.total_alternatives,
                    globals=list(graph.globals.names), max_depth=graph.max_depth())
    elif kind == "mutation":
        m = parse_mutation(path.read_text())
        info["summary"] = m.summary()
    elif kind == "toon":
        rep = parse_toon(path.read_text())
        info.update(features=rep.declared("features"), subnodes=rep.declared("subnodes"),
                    context_keys=list(rep.context))
    elif kind == "dataset":
        ds = load_dataset(path)
        info["summary"] = ds.summary()
    elif kind == "transcript":
        tr = parse_transcript(path.read_text())
        info.update(steps=len(tr.steps), islands=sorted(tr.islands))
        for i, entry in enumerate(tr.steps):
            parse_mutation(entry["mutation"])
    elif kind == "config":
        cfg = load_run_config(path)
        info["config"] = cfg.to_json()
    else:
        raise CommandError(f"unknown kind {kind!r}")
    return info


# --- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="evograph", description="Evolve, score and inspect computation graphs.",
        epilog=f"Remote provider: set {ENV_URL}, {ENV_MODEL} and {ENV_KEY}.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-dataset", help="write a synthetic structural-break dataset")
    s.add_argument("--n-series", type=int, default=400)
    s.add_argument("--length", type=int, default=128)
    s.add_argument("--break-fraction", type=float, default=0.3)
    s.add_argument("--magnitude", type=float, default=1.0, help="0 makes labels uninformative")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth_dataset)

    r = sub.add_parser("run", help="run an experiment from a config file")
    g = r.add_mutually_exclusive_group(required=True)
    g.add_argument("config", nargs="?", help="run config (YAML or JSON)")
    g.add_argument("--resume", metavar="CHECKPOINT", help="continue from a checkpoint directory")
    r.add_argument("--until", type=int, help="stop after this global step")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eval", help="score a graph file once and print the report")
    e.add_argument("graph")
    e.add_argument("--dataset", required=True)
    e.add_argument("--seed", type=int, default=0, help="globals initialisation seed")
    e.add_argument("--folds", type=int)
    e.add_argument("--cap", type=int, help="configuration cap")
    e.add_argument("--phase1-iters", type=int, help="default: the cold-start budget")
    e.add_argument("--toon", action="store_true", help="include the TOON text")
    e.set_defaults(func=cmd_eval)

    m = sub.add_parser("report", help="global-best milestones from an event log")
    m.add_argument("events")
    m.add_argument("--format", choices=("json", "csv"), default="json")
    m.set_defaults(func=cmd_report)

    v = sub.add_parser("validate", help="check a graph, mutation, TOON, dataset, transcript or config")
    v.add_argument("file")
    v.add_argument("--kind", choices=("graph", "mutation", "toon", "dataset", "transcript", "config"))
    v.add_argument("--dataset", help="dataset whose inputs a graph may read")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except (CommandError, *EXPECTED_ERRORS) as exc:
        _emit({"error": {"type": type(exc).__name__, "message": str(exc), "command": args.command}})
        return 1
    if isinstance(result, str):
        sys.stdout.write(result)
    else:
        _emit(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
