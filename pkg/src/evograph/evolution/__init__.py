"""The per-island evolution step and its proposal providers."""
from .memorandum import (SECTIONS, WORD_CAP, Memorandum, outcome_line, template_update,
                         validate_memorandum, word_count)
from .prompts import Prompt, engineer_prompt, memorandum_prompt, scientist_prompt
from .providers import (NOOP_MUTATION, ProposalProvider, ProviderError, RemoteProvider,
                        ScriptedProvider, Transcript, TranscriptError, load_transcript,
                        make_provider, parse_transcript)
from .step import IslandState, StepOutcome, initialize, salvage, settle, step

__all__ = [
    "SECTIONS", "WORD_CAP", "Memorandum", "outcome_line", "template_update",
    "validate_memorandum", "word_count", "Prompt", "engineer_prompt", "memorandum_prompt",
    "scientist_prompt", "NOOP_MUTATION", "ProposalProvider", "ProviderError", "RemoteProvider",
    "ScriptedProvider", "Transcript", "TranscriptError", "load_transcript", "make_provider",
    "parse_transcript", "IslandState", "StepOutcome", "initialize", "salvage", "settle", "step",
]
