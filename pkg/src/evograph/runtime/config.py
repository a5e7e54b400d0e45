"""Run configuration file (YAML or JSON)."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from ..scorer.pipeline import ScorerConfig

DEFAULT_TEMPERATURES = (0.35, 0.5, 0.6, 0.75)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: str
    graph: str  # seed graph file
    provider: dict = field(default_factory=lambda: {"kind": "scripted"})
    islands: int = 1
    temperatures: list | None = None
    steps: int = 10
    seed: int = 0
    scorer: dict = field(default_factory=dict)  # ScorerConfig overrides
    out: str = "run"
    workers: int = 1  # >1 steps the islands of a round in threads
    migration_throttle: int = 0  # minimum global steps between migrations

    def __post_init__(self):
        if self.islands < 1:
            raise ConfigError("islands must be >= 1")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.temperatures is None:
            self.temperatures = [DEFAULT_TEMPERATURES[i % len(DEFAULT_TEMPERATURES)]
                                 for i in range(self.islands)]
        self.temperatures = [float(t) for t in self.temperatures]
        if len(self.temperatures) != self.islands:
            raise ConfigError(f"{len(self.temperatures)} temperatures for {self.islands} islands")
        if not isinstance(self.provider, dict) or "kind" not in self.provider:
            raise ConfigError("provider must be a mapping with a 'kind'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            self.scorer_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scorer: {exc}") from exc

    def scorer_config(self) -> ScorerConfig:
        return ScorerConfig.from_json(self.scorer)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict, base: Path | None = None) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("run config must be a mapping")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown run config keys {sorted(unknown)}")
        missing = [k for k in ("dataset", "graph") if k not in data]
        if missing:
            raise ConfigError(f"run config lacks {missing}")
        data = dict(data)
        if base is not None:
            # relative paths are resolved against the config file's directory
            for key in ("dataset", "graph", "out"):
                if key in data and not Path(data[key]).is_absolute():
                    data[key] = str(base / data[key])
            provider = dict(data.get("provider") or {"kind": "scripted"})
            if "transcript" in provider and not Path(provider["transcript"]).is_absolute():
                provider["transcript"] = str(base / provider["transcript"])
            data["provider"] = provider
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read run config {path}: {exc}") from exc
    return RunConfig.from_json(data, path.parent)
