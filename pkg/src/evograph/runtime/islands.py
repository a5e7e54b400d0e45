"""Multi-island orchestration with global-best tracking and migration.

Islands advance in rounds: round ``r`` gives one step to each island that
still has budget (first come, first served on the global step budget).
Steps within a round are independent, so they may run in threads; their
events are committed in island order, and global-best registration and
migration happen after the round, which is the next step boundary of every
island. The event log is therefore identical for any worker count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..evolution.providers import make_provider
from ..evolution.step import IslandState, initialize, step
from ..graph.io import dump_graph, load_graph
from ..graph.model import EvoGraph
from ..tensor.dataset import load_dataset
from .config import RunConfig
from .events import EventLog


def island_prefix(island: int) -> str:
    return f"i{island}a"


def island_rng(seed: int, island: int) -> np.random.Generator:
    """Independent stream per island, derived from (run seed, island id)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(island)]))


@dataclass
class GlobalBest:
    version: int
    score: float
    island: int
    step: int
    graph: EvoGraph

    def to_json(self) -> dict:
        return {"version": self.version, "score": self.score, "island": self.island,
                "step": self.step}


class Run:
    """State of one experiment; see :meth:`start` and :meth:`restore`."""

    def __init__(self, config: RunConfig, dataset, islands: list, providers: list, log: EventLog,
                 global_step: int = 0, best: GlobalBest | None = None, milestones=None,
                 last_migration: int | None = None):
        self.config = config
        self.dataset = dataset
        self.sc = config.scorer_config()
        self.islands = islands
        self.providers = providers
        self.log = log
        self.global_step = global_step
        self.best = best
        self.milestones = list(milestones or [])
        self.last_migration = last_migration

    # --- construction ---------------------------------------------------------

    @classmethod
    def start(cls, config: RunConfig, dataset=None, seed_text: str | None = None,
              log_path: Path | None | bool = True) -> "Run":
        dataset = dataset if dataset is not None else load_dataset(config.dataset)
        seed_text = seed_text if seed_text is not None else Path(config.graph).read_text()
        if log_path is True:
            log_path = Path(config.out) / "events.jsonl"
        log = EventLog(log_path or None)
        log.append("run_start", 0, None, {"config": config.to_json(),
                                           "dataset": dataset.summary()})
        transcripts: dict = {}
        providers = [make_provider(config.provider, k, config.temperatures[k], transcripts)
                     for k in range(config.islands)]
        task_context = providers[0].task_context(dataset.summary())
        log.append("task_context", 0, None, {"text": task_context})
        islands = []
        for k in range(config.islands):
            graph = load_graph(seed_text, dataset.input_names, seed=config.seed,
                               id_prefix=island_prefix(k))
            state, payload = initialize(k, config.temperatures[k], graph, dataset,
                                        config.scorer_config(), island_rng(config.seed, k),
                                        task_context)
            log.append("init", 0, k, payload)
            islands.append(state)
        run = cls(config, dataset, islands, providers, log)
        for state in islands:
            run._register(state, 0)
        return run

    @classmethod
    def restore(cls, directory, dataset=None) -> "Run":
        from .checkpoint import load_checkpoint

        return load_checkpoint(directory, dataset)

    # --- main loop --------------------------------------------------------------

    def run(self, until: int | None = None, checkpoint_dir: Path | None | bool = True) -> dict:
        """Execute rounds until the step budget (or ``until``) is reached."""
        from .checkpoint import save_checkpoint

        total = self.config.steps if until is None else min(until, self.config.steps)
        if checkpoint_dir is True:
            checkpoint_dir = Path(self.config.out) / "checkpoint"
        while self.global_step < total:
            n = min(len(self.islands), total - self.global_step)
            accepted = self._round(self.islands[:n])
            if checkpoint_dir and (accepted or self.global_step >= total):
                save_checkpoint(self, checkpoint_dir)
        if self.global_step >= self.config.steps:
            return self.finish()
        return self.summary()

    def _round(self, batch: list) -> bool:
        buffers = {s.id: [] for s in batch}

        def work(state):
            def log(kind, payload, _buf=buffers[state.id]):
                _buf.append((kind, payload))
            return step(state, self.providers[state.id], self.dataset, self.sc, log)

        if self.config.workers > 1 and len(batch) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                outcomes = list(pool.map(work, batch))
        else:
            outcomes = [work(s) for s in batch]
        steps = {}
        for state, outcome in zip(batch, outcomes):
            self.global_step += 1
            steps[state.id] = self.global_step
            for kind, payload in buffers[state.id]:
                self.log.append(kind, self.global_step, state.id, payload)
            payload = outcome.to_json()
            payload.update(island_step=state.step, best_so_far=state.best,
                           memorandum=state.memo.text)
            self.log.append("step", self.global_step, state.id, payload)
        for state in batch:
            self._register(state, steps[state.id])
        return any(o.status == "accepted" or o.salvage.get("kept") for o in outcomes)

    def _register(self, state: IslandState, step_no: int) -> None:
        """Record a strictly better global best and migrate it to the weakest island."""
        if self.best is not None and state.score <= self.best.score:
            return
        prev = None if self.best is None else self.best.score
        version = 1 if self.best is None else self.best.version + 1
        self.best = GlobalBest(version, state.score, state.id, step_no, state.graph)
        row = {"version": version, "step": step_no, "island": state.id, "auc": state.score,
               "delta": None if prev is None else state.score - prev}
        self.milestones.append(row)
        self.log.append("global_best", step_no, state.id,
                        dict(row, graph=dump_graph(state.graph)))
        if step_no == 0 or len(self.islands) < 2:
            return
        throttle = self.config.migration_throttle
        if self.last_migration is not None and step_no - self.last_migration < throttle:
            self.log.append("migration_skipped", step_no, state.id, {"reason": "throttled"})
            return
        others = [s for s in self.islands if s.id != state.id]
        target = min(others, key=lambda s: (s.score, s.id))
        scores = {s.id: s.score for s in self.islands}
        if state.score <= target.score:
            return
        before = target.score
        target.graph = state.graph.rebased(island_prefix(target.id),
                                           max(state.graph.next_id, target.graph.next_id))
        target.score = state.score
        target.best = max(target.best, state.score)
        target.toon, target.context = state.toon, dict(state.context)
        self.last_migration = step_no
        self.log.append("migration", step_no, state.id,
                        {"from": state.id, "to": target.id, "version": version,
                         "score": state.score, "recipient_score_before": before,
                         "island_scores": scores, "globals": list(state.graph.globals.names)})

    # --- reporting --------------------------------------------------------------

    def summary(self) -> dict:
        return {"global_step": self.global_step, "best": self.best.to_json() if self.best else None,
                "milestones": self.milestones,
                "islands": [{"id": s.id, "score": s.score, "best": s.best, "steps": s.step,
                             "temperature": s.temperature} for s in self.islands]}

    def finish(self) -> dict:
        summary = self.summary()
        if not self.log.lines or '"type":"summary"' not in self.log.lines[-1]:
            self.log.append("summary", self.global_step, None, summary)
        if self.best is not None and self.log.path is not None:
            out = self.log.path.parent
            (out / "best_graph.yaml").write_text(dump_graph(self.best.graph))
        return summary


def run_experiment(config: RunConfig, dataset=None, seed_text: str | None = None) -> Run:
    run = Run.start(config, dataset, seed_text)
    run.run()
    return run
