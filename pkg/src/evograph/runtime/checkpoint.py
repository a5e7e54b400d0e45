"""Checkpoint directory layout and restore.

::

    checkpoint/
      state.json               run counters, island scalars, RNG and provider
                               state, event-log length, sha256 of every file
      island_<k>/graph.yaml    incumbent graph in the plain graph-file layout
      island_<k>/meta.json     ids, statistics, counters (graph_meta)
      island_<k>/globals.npz   globals values, exact float32
      best/graph.yaml, best/meta.json, best/globals.npz   global-best snapshot

The directory is written to a sibling temp directory and swapped in, so a
crash never leaves a half-written checkpoint behind.
"""
from __future__ import annotations

import hashlib
import json
import shutil
from pathlib import Path

import numpy as np

from ..evolution.memorandum import Memorandum
from ..evolution.providers import make_provider
from ..evolution.step import IslandState
from ..graph.io import dump_graph, globals_arrays, graph_from_parts, graph_meta
from ..tensor.dataset import load_dataset
from .config import RunConfig
from .events import EventLog, _plain

CHECKPOINT_FORMAT = "evograph-checkpoint/1"


class CheckpointError(ValueError):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_graph(graph, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "graph.yaml").write_text(dump_graph(graph))
    (directory / "meta.json").write_text(json.dumps(_plain(graph_meta(graph)), indent=1,
                                                    sort_keys=True) + "\n")
    arrays = globals_arrays(graph)
    with open(directory / "globals.npz", "wb") as fh:
        np.savez(fh, **arrays)


def _read_graph(directory: Path):
    meta = json.loads((directory / "meta.json").read_text())
    with np.load(directory / "globals.npz") as data:
        values = {k: data[k] for k in data.files}
    return graph_from_parts((directory / "graph.yaml").read_text(), meta, values)


def save_checkpoint(run, directory) -> Path:
    directory = Path(directory)
    tmp = directory.with_name(directory.name + ".tmp")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    islands = []
    for state, provider in zip(run.islands, run.providers):
        _write_graph(state.graph, tmp / f"island_{state.id}")
        islands.append({
            "id": state.id, "temperature": state.temperature, "score": state.score,
            "best": state.best, "step": state.step, "memo": state.memo.text, "toon": state.toon,
            "context": state.context, "recent_errors": state.recent_errors,
            "task_context": state.task_context,
            "rng": state.rng.bit_generator.state, "provider": provider.get_state(),
        })
    best = None
    if run.best is not None:
        _write_graph(run.best.graph, tmp / "best")
        best = run.best.to_json()
    digests = {str(p.relative_to(tmp)): _sha256(p) for p in sorted(tmp.rglob("*")) if p.is_file()}
    state = {"format": CHECKPOINT_FORMAT, "config": run.config.to_json(),
             "global_step": run.global_step, "log_lines": len(run.log),
             "log_path": None if run.log.path is None else str(run.log.path),
             "best": best, "milestones": run.milestones, "last_migration": run.last_migration,
             "islands": islands, "digests": digests}
    (tmp / "state.json").write_text(json.dumps(_plain(state), indent=1, sort_keys=True) + "\n")
    old = directory.with_name(directory.name + ".old")
    if directory.exists():
        if old.exists():
            shutil.rmtree(old)
        directory.rename(old)
    tmp.rename(directory)
    if old.exists():
        shutil.rmtree(old)
    return directory


def verify_checkpoint(directory) -> dict:
    """Load ``state.json`` and check the format and every recorded digest."""
    directory = Path(directory)
    try:
        state = json.loads((directory / "state.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read {directory / 'state.json'}: {exc}") from exc
    if state.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"checkpoint format {state.get('format')!r} is not {CHECKPOINT_FORMAT!r}")
    for name, digest in state["digests"].items():
        path = directory / name
        if not path.is_file():
            raise CheckpointError(f"checkpoint file {name} is missing")
        if _sha256(path) != digest:
            raise CheckpointError(f"integrity error: {name} does not match its stored digest")
    return state


def load_checkpoint(directory, dataset=None, log_path=None):
    """Rebuild a :class:`Run`; the event log is truncated to the checkpointed length."""
    from .islands import GlobalBest, Run

    directory = Path(directory)
    state = verify_checkpoint(directory)
    config = RunConfig.from_json(state["config"])
    dataset = dataset if dataset is not None else load_dataset(config.dataset)
    islands, providers, transcripts = [], [], {}
    for rec in state["islands"]:
        graph = _read_graph(directory / f"island_{rec['id']}")
        rng = np.random.default_rng()
        rng.bit_generator.state = rec["rng"]
        island = IslandState(rec["id"], rec["temperature"], graph, rec["score"], rng,
                             Memorandum.parse(rec["memo"]) if rec["memo"] else Memorandum(),
                             rec["toon"], rec["context"], rec["step"], rec["best"],
                             list(rec["recent_errors"]), rec["task_context"])
        provider = make_provider(config.provider, rec["id"], rec["temperature"], transcripts)
        provider.set_state(rec["provider"])
        islands.append(island)
        providers.append(provider)
    best = None
    if state["best"] is not None:
        b = state["best"]
        best = GlobalBest(b["version"], b["score"], b["island"], b["step"],
                          _read_graph(directory / "best"))
    path = log_path if log_path is not None else state["log_path"]
    log = EventLog(Path(path) if path else None, truncate_to=state["log_lines"] if path else None)
    return Run(config, dataset, islands, providers, log, state["global_step"], best,
               state["milestones"], state["last_migration"])
