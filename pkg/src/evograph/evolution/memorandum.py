"""Per-island experiment memorandum: a word-capped, sectioned running log."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

SECTIONS = ("OUTCOME HISTORY", "STATE", "WHAT WORKS", "WHAT FAILED", "ERROR LOG")
SECTION_ALIASES = {"SNAPSHOT": "STATE"}
WORD_CAP = 500
OUTCOME_LINES = 8
NOTE_LINES = 6

_HEADER = re.compile(r"^\[([A-Z ]+)\]\s*$")


def outcome_line(status: str, before: float | None, after: float | None, note: str = "") -> str:
    """``ACCEPTED: 0.957219 -> 0.957715 (D +0.000496)`` and friends."""
    b = "none" if before is None else f"{before:.6f}"
    if after is None:
        text = f"{status.upper()}: {b} -> none (D n/a)"
    elif before is None:
        text = f"{status.upper()}: {b} -> {after:.6f} (D n/a)"
    else:
        text = f"{status.upper()}: {b} -> {after:.6f} (D {after - before:+.6f})"
    return f"{text} -- {note}" if note else text


@dataclass(frozen=True)
class Memorandum:
    outcomes: tuple = ()  # newest first
    state: tuple = ()
    works: tuple = ()
    failed: tuple = ()
    errors: tuple = ()  # oldest first, never dropped while under the cap

    def __post_init__(self):
        # one physical line per entry, so text -> parse -> text is exact
        for name in ("outcomes", "state", "works", "failed", "errors"):
            object.__setattr__(self, name, tuple(" ".join(str(x).split()) for x in getattr(self, name)
                                                if str(x).split()))

    _FIELDS = {"OUTCOME HISTORY": "outcomes", "STATE": "state", "WHAT WORKS": "works",
               "WHAT FAILED": "failed", "ERROR LOG": "errors"}

    @property
    def text(self) -> str:
        blocks = []
        for title in SECTIONS:
            lines = getattr(self, self._FIELDS[title])
            blocks.append("\n".join([f"[{title}]"] + [f"- {ln}" for ln in lines]))
        return "\n\n".join(blocks) + "\n"

    @property
    def words(self) -> int:
        return word_count(self.text)

    @classmethod
    def parse(cls, text: str) -> "Memorandum":
        """Read a memorandum back; raises ValueError if a section is missing."""
        found: dict = {}
        current = None
        for raw in text.splitlines():
            line = raw.strip()
            m = _HEADER.match(line)
            if m:
                title = SECTION_ALIASES.get(m.group(1), m.group(1))
                if title not in cls._FIELDS:
                    raise ValueError(f"unknown memorandum section [{m.group(1)}]")
                current = title
                found.setdefault(current, [])
                continue
            if not line:
                continue
            if current is None:
                raise ValueError("text before the first memorandum section")
            if line.startswith("- "):
                found[current].append(line[2:])
            elif found[current]:
                found[current][-1] += " " + line
            else:
                found[current].append(line)
        missing = [t for t in SECTIONS if t not in found]
        if missing:
            raise ValueError(f"memorandum lacks sections {missing}")
        return cls(**{cls._FIELDS[t]: tuple(v) for t, v in found.items()})

    def capped(self, cap: int = WORD_CAP) -> "Memorandum":
        """Drop the oldest notes until the text fits ``cap`` words.

        Notes go first, then outcome lines beyond the latest, then state lines;
        the error log is trimmed only as a last resort.
        """
        memo = self
        order = ("works", "failed", "outcomes", "state", "errors")
        while memo.words > cap:
            for name in order:
                lines = getattr(memo, name)
                floor = 1 if name == "outcomes" else 0
                if len(lines) > floor:
                    # notes and errors are stored oldest first, outcomes newest first
                    trimmed = lines[:-1] if name == "outcomes" else lines[1:]
                    memo = replace(memo, **{name: trimmed})
                    break
            else:
                break
        return memo


def word_count(text: str) -> int:
    return len(text.split())


def _push(lines: tuple, line: str, limit: int) -> tuple:
    """Append ``line`` (skipping exact repeats) and keep the last ``limit``."""
    if lines and lines[-1] == line:
        return lines
    return (lines + (line,))[-limit:]


def template_update(memo: Memorandum, outcome, context: dict | None = None,
                    island_best: float | None = None) -> Memorandum:
    """Deterministic memorandum update from a step outcome and TOON context."""
    line = outcome_line(outcome.status, outcome.score_before, outcome.score_after)
    outcomes = ((line,) + memo.outcomes)[:OUTCOME_LINES]
    summary = outcome.describe()
    works, failed = memo.works, memo.failed
    if outcome.status == "accepted":
        works = _push(works, summary, NOTE_LINES)
    else:
        failed = _push(failed, summary, NOTE_LINES)
    if outcome.salvage and outcome.salvage.get("kept"):
        works = _push(works, f"salvaged {', '.join(outcome.salvage['kept'])} from a rejected mutation",
                      NOTE_LINES)
    errors = memo.errors
    for err in outcome.errors:
        if err not in errors:
            errors = errors + (err,)
    state = []
    ctx = context or {}
    if "effective_rank" in ctx:
        state.append(f"Effective rank {ctx['effective_rank']:.1f} over "
                     f"{ctx.get('n_features_best_config', 0)} best-config features.")
    if "mean_max_corr" in ctx:
        state.append(f"Mean max correlation {ctx['mean_max_corr']:.3f}; "
                     f"{ctx.get('n_clusters', 0)} clusters.")
    if "total_alternatives" in ctx:
        state.append(f"Graph holds {ctx['total_alternatives']} alternatives in "
                     f"{ctx.get('n_nodes', 0)} nodes; {ctx.get('n_configs', 0)} configurations scored.")
    if island_best is not None:
        state.append(f"Island best AUC {island_best:.4f}.")
    if not outcome.errors:
        state.append("No new runtime errors in the latest step.")
    return Memorandum(outcomes, tuple(state), works, failed, errors).capped()


def validate_memorandum(text: str, fallback: Memorandum) -> tuple[Memorandum, list]:
    """Parse provider text; fall back or truncate on violations. Returns (memo, problems)."""
    problems = []
    try:
        memo = Memorandum.parse(text)
    except ValueError as exc:
        return fallback, [f"memorandum rejected: {exc}"]
    if memo.words > WORD_CAP:
        problems.append(f"memorandum has {memo.words} words; truncated to {WORD_CAP}")
        memo = memo.capped()
    return memo, problems
