"""Island orchestration, event log and checkpoints."""
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint, verify_checkpoint
from .config import DEFAULT_TEMPERATURES, ConfigError, RunConfig, load_run_config
from .events import EventLog, encode_event, read_events
from .islands import GlobalBest, Run, island_prefix, island_rng, run_experiment

__all__ = [
    "CheckpointError", "load_checkpoint", "save_checkpoint", "verify_checkpoint",
    "DEFAULT_TEMPERATURES", "ConfigError", "RunConfig", "load_run_config", "EventLog",
    "encode_event", "read_events", "GlobalBest", "Run", "island_prefix", "island_rng",
    "run_experiment",
]
