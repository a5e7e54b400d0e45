"""Proposal providers: a scripted replay double and a remote JSON endpoint."""
from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import yaml

from .prompts import Prompt

NOOP_MUTATION = "remove: []\nadd: {}\n"
ENV_URL = "EVOGRAPH_PROVIDER_URL"
ENV_MODEL = "EVOGRAPH_PROVIDER_MODEL"
ENV_KEY = "EVOGRAPH_PROVIDER_KEY"


class ProviderError(RuntimeError):
    """Transport or protocol failure; the step is skipped."""


class TranscriptError(ValueError):
    pass


class ProposalProvider(Protocol):
    temperature: float

    def task_context(self, summary: dict) -> str: ...

    def scientist(self, prompt: Prompt) -> str: ...

    def engineer(self, prompt: Prompt) -> str: ...

    def memorandum(self, prompt: Prompt) -> str | None:
        """New memorandum text, or None to let the engine fill its template."""

    def get_state(self) -> dict: ...

    def set_state(self, state: dict) -> None: ...


# --- scripted ------------------------------------------------------------------


def _mutation_text(entry, where: str) -> str:
    m = entry.get("mutation", NOOP_MUTATION)
    if isinstance(m, str):
        return m
    if isinstance(m, dict):
        return yaml.safe_dump(m, sort_keys=False, default_flow_style=False, width=10_000)
    raise TranscriptError(f"{where}: mutation must be text or a mapping")


def _check_steps(steps, where: str) -> list:
    if not isinstance(steps, list):
        raise TranscriptError(f"{where} must be a list")
    out = []
    for i, entry in enumerate(steps):
        if isinstance(entry, str):
            entry = {"mutation": entry}
        if not isinstance(entry, dict):
            raise TranscriptError(f"{where}[{i}] must be a mapping")
        unknown = set(entry) - {"hypotheses", "mutation", "memorandum", "fail"}
        if unknown:
            raise TranscriptError(f"{where}[{i}]: unknown keys {sorted(unknown)}")
        out.append({"hypotheses": str(entry.get("hypotheses", "")),
                    "mutation": _mutation_text(entry, f"{where}[{i}]"),
                    "memorandum": entry.get("memorandum"),
                    "fail": entry.get("fail")})
    return out


@dataclass(frozen=True)
class Transcript:
    task_context: str
    steps: list
    islands: dict  # island id -> step list overriding ``steps``


def parse_transcript(data) -> Transcript:
    """Normalise a transcript document.

    Shape: ``{task_context: str, steps: [...], islands: {id: [...]}}`` where
    each step is ``{hypotheses, mutation, memorandum?, fail?}``; ``islands``
    entries override ``steps`` for that island.
    """
    if isinstance(data, str):
        try:
            data = yaml.safe_load(data)
        except yaml.YAMLError as exc:
            raise TranscriptError(f"transcript is not valid YAML/JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise TranscriptError("transcript must be a mapping")
    unknown = set(data) - {"task_context", "steps", "islands"}
    if unknown:
        raise TranscriptError(f"unknown transcript keys {sorted(unknown)}")
    islands = data.get("islands") or {}
    if not isinstance(islands, dict):
        raise TranscriptError("islands must map island ids to step lists")
    return Transcript(str(data.get("task_context", "")),
                      _check_steps(data.get("steps") or [], "steps"),
                      {int(k): _check_steps(v, f"islands.{k}") for k, v in islands.items()})


def load_transcript(path) -> Transcript:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise TranscriptError(f"cannot read transcript {path}: {exc}") from exc
    return parse_transcript(text)


class ScriptedProvider:
    """Replays a transcript; after its end every mutation is a no-op."""

    def __init__(self, transcript, island: int = 0, temperature: float = 0.0):
        self.transcript = transcript if isinstance(transcript, Transcript) \
            else parse_transcript(transcript)
        self.island = island
        self.temperature = temperature
        self.cursor = 0

    @property
    def steps(self) -> list:
        return self.transcript.islands.get(self.island, self.transcript.steps)

    def _entry(self):
        return self.steps[self.cursor] if self.cursor < len(self.steps) else None

    def task_context(self, summary: dict) -> str:
        return self.transcript.task_context or "Binary classification of labelled tensors."

    def scientist(self, prompt: Prompt) -> str:
        entry = self._entry()
        if entry is not None and entry["fail"]:
            self.cursor += 1
            raise ProviderError(str(entry["fail"]))
        return entry["hypotheses"] if entry else "No further scripted hypotheses."

    def engineer(self, prompt: Prompt) -> str:
        entry = self._entry()
        self.cursor += 1
        return entry["mutation"] if entry else NOOP_MUTATION

    def memorandum(self, prompt: Prompt) -> str | None:
        entry = self.steps[self.cursor - 1] if 0 < self.cursor <= len(self.steps) else None
        return entry["memorandum"] if entry else None

    def get_state(self) -> dict:
        return {"cursor": self.cursor}

    def set_state(self, state: dict) -> None:
        self.cursor = int(state.get("cursor", 0))


# --- remote --------------------------------------------------------------------


class RemoteProvider:
    """Chat endpoint speaking ``{system, user, temperature, max_tokens} -> {text}``.

    The scientist call uses the island temperature; engineer, memorandum and
    task-context calls use temperature 0.
    """

    def __init__(self, endpoint: str, model: str = "", temperature: float = 0.5,
                 api_key: str | None = None, max_tokens: int = 4096, timeout: float = 120.0,
                 retries: int = 3, backoff: float = 2.0, sleep=time.sleep):
        if not endpoint:
            raise ProviderError(f"no provider endpoint configured (set {ENV_URL})")
        self.endpoint = endpoint
        self.model = model
        self.temperature = float(temperature)
        self.api_key = api_key
        self.max_tokens = int(max_tokens)
        self.timeout = timeout
        self.retries = int(retries)
        self.backoff = float(backoff)
        self._sleep = sleep
        self._context: str | None = None

    @classmethod
    def from_env(cls, temperature: float, **kw) -> "RemoteProvider":
        return cls(kw.pop("endpoint", None) or os.environ.get(ENV_URL, ""),
                   kw.pop("model", None) or os.environ.get(ENV_MODEL, ""),
                   temperature, kw.pop("api_key", None) or os.environ.get(ENV_KEY), **kw)

    def request_body(self, prompt: Prompt, temperature: float) -> dict:
        body = {"system": prompt.system, "user": prompt.user, "temperature": float(temperature),
                "max_tokens": self.max_tokens}
        if self.model:
            body["model"] = self.model
        return body

    def _post(self, body: dict) -> str:
        data = json.dumps(body).encode()
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            req = urllib.request.Request(self.endpoint, data=data, headers=headers, method="POST")
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    payload = json.loads(resp.read().decode())
            except (urllib.error.URLError, TimeoutError, OSError, json.JSONDecodeError) as exc:
                last = exc
                continue
            if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
                raise ProviderError("provider response lacks a 'text' field")
            return payload["text"]
        raise ProviderError(f"provider unreachable after {self.retries + 1} attempts: {last}")

    def task_context(self, summary: dict) -> str:
        from .prompts import task_context_prompt

        if self._context is None:
            self._context = self._post(self.request_body(task_context_prompt(summary), 0.0))
        return self._context

    def scientist(self, prompt: Prompt) -> str:
        return self._post(self.request_body(prompt, self.temperature))

    def engineer(self, prompt: Prompt) -> str:
        return self._post(self.request_body(prompt, 0.0))

    def memorandum(self, prompt: Prompt) -> str | None:
        return self._post(self.request_body(prompt, 0.0))

    def get_state(self) -> dict:
        return {"task_context": self._context}

    def set_state(self, state: dict) -> None:
        self._context = state.get("task_context")


def make_provider(spec: dict, island: int, temperature: float, transcript_cache: dict | None = None):
    """Build a provider from a run-config ``provider`` mapping."""
    spec = dict(spec or {})
    kind = spec.pop("kind", "scripted")
    if kind == "scripted":
        path = spec.get("transcript")
        if path is None:
            raise ProviderError("scripted provider needs a 'transcript' path")
        cache = transcript_cache if transcript_cache is not None else {}
        if path not in cache:
            cache[path] = load_transcript(path)
        return ScriptedProvider(cache[path], island, temperature)
    if kind == "remote":
        return RemoteProvider.from_env(temperature, **spec)
    raise ProviderError(f"unknown provider kind {kind!r}")
