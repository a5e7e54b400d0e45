"""Append-only JSONL event log: one ``{type, step, island, payload}`` record per line."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_plain(v) for v in items]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def encode_event(kind: str, step: int, island: int | None, payload: dict) -> str:
    record = {"type": kind, "step": step, "island": island, "payload": _plain(payload)}
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)


class EventLog:
    """Writes events in the order they are appended; ``path=None`` keeps them in memory."""

    def __init__(self, path: Path | None = None, truncate_to: int | None = None):
        self.path = Path(path) if path is not None else None
        self.lines: list = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if truncate_to is None:
                self.path.write_text("")
            else:
                kept = read_lines(self.path)[:truncate_to]
                if len(kept) < truncate_to:
                    raise ValueError(f"event log {self.path} has only {len(kept)} of "
                                     f"{truncate_to} checkpointed lines")
                self.path.write_text("".join(line + "\n" for line in kept))
                self.lines = kept

    def append(self, kind: str, step: int, island: int | None, payload: dict) -> dict:
        line = encode_event(kind, step, island, payload)
        self.lines.append(line)
        if self.path is not None:
            with self.path.open("a") as fh:
                fh.write(line + "\n")
        return json.loads(line)

    def __len__(self):
        return len(self.lines)

    def records(self) -> list:
        return [json.loads(line) for line in self.lines]


def read_lines(path) -> list:
    text = Path(path).read_text()
    return [line for line in text.splitlines() if line.strip()]


def read_events(path) -> list:
    out = []
    for i, line in enumerate(read_lines(path), 1):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{i}: not JSON: {exc}") from exc
        if not isinstance(rec, dict) or not {"type", "step", "island", "payload"} <= set(rec):
            raise ValueError(f"{path}:{i}: event lacks type/step/island/payload")
        out.append(rec)
    return out
