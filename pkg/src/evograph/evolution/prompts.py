"""Prompt assembly for the two-stage proposal calls and the memorandum update.

The scientist sees the annotated graph, the TOON diagnostics and the island
memorandum. The engineer sees the annotated graph and recent execution errors
in its user message, with the scientist's hypotheses and the global rules in
its system message, so diagnostics reach it only through the hypotheses.
"""
from __future__ import annotations

from dataclasses import dataclass

from .memorandum import WORD_CAP

GLOBAL_RULES = """\
GRAPH RULES
- Nodes hold competing alternatives. Each alternative is a lambda in the
  expression language; parameters of intermediate, output and ridge_w
  alternatives name the inputs or nodes they read.
- Callable nodes start with '@'; their alternatives return functions and are
  called by other expressions, e.g. @act(x).
- 'output' alternatives are all evaluated; each becomes one or more feature
  columns for the ridge readout. Other nodes with several alternatives
  multiply the number of configurations.
- ridge_w returns one nonnegative weight per sample; ridge_g maps residuals to
  IRLS weights and takes exactly one parameter.
- '@globals' is append-only: add entries with add_globals (name: init
  expression), read them as globals["name"], never remove or overwrite them.
- Keep the graph acyclic. Remove alternatives by id."""

MUTATION_FORMAT = """\
remove:
  - some_alt_id
add:
  some_node:
    - 'lambda args: <expr>'
add_globals:
  name: 'init expression'"""


@dataclass(frozen=True)
class Prompt:
    system: str
    user: str

    def to_json(self) -> dict:
        return {"system": self.system, "user": self.user}


def scientist_prompt(task_context: str, annotated_graph: str, toon: str, memo: str) -> Prompt:
    system = (
        "You study an evolving graph of feature computations for binary classification "
        "and propose structural changes likely to raise the best configuration's "
        "cross-validated ROC-AUC.\n\n"
        f"TASK CONTEXT\n{task_context.strip()}\n"
    )
    user = (
        "Write 8-12 concrete hypotheses for the next mutation. No code, no YAML.\n"
        "For each give the change, the diagnostic evidence behind it, the expected effect, "
        "and a risk level (conservative, balanced or risky).\n\n"
        f"==== CURRENT GRAPH (YAML WITH STATS) ====\n{annotated_graph.rstrip()}\n\n"
        f"==== FEATURE DIAGNOSTICS (TOON -- PRIMARY EVIDENCE) ====\n{toon.rstrip()}\n\n"
        f"==== EXPERIMENT LOG (OUTCOME HISTORY) ====\n{memo.rstrip()}\n\n"
        f"{GLOBAL_RULES}\n"
    )
    return Prompt(system, user)


def engineer_prompt(annotated_graph: str, hypotheses: str, errors) -> Prompt:
    system = (
        "You turn research hypotheses into one valid graph mutation.\n\n"
        f"HYPOTHESES\n{hypotheses.strip() or '(none)'}\n\n{GLOBAL_RULES}\n"
    )
    error_lines = "\n".join(f"- {e}" for e in errors) if errors else "(none)"
    user = (
        "Pick the strongest hypotheses and write a single mutation. The score is the best "
        "configuration's AUC; extra output alternatives add features, extra alternatives "
        "elsewhere add configurations.\n\n"
        f"Answer with YAML only, in this shape:\n{MUTATION_FORMAT}\n\n"
        f"==== CURRENT GRAPH (YAML WITH STATS) ====\n{annotated_graph.rstrip()}\n\n"
        f"==== EXECUTION ERRORS FROM PREVIOUS ATTEMPTS ====\n{error_lines}\n"
    )
    return Prompt(system, user)


def memorandum_prompt(memo: str, outcome: str, toon: str) -> Prompt:
    system = (
        "You keep the experiment log of one search island. Record what happened and "
        "what changed; no hypotheses and no recommendations. Use exactly these sections: "
        "[OUTCOME HISTORY] (latest 8 outcome lines, newest first), [STATE], [WHAT WORKS], "
        "[WHAT FAILED], [ERROR LOG] (keep every earlier error). "
        f"Stay under {WORD_CAP} words, use '- ' bullet lines, no tables, and cite only "
        "numbers that appear in the diagnostics or outcomes."
    )
    user = (
        f"==== PREVIOUS LOG ====\n{memo.rstrip()}\n\n"
        f"==== LATEST OUTCOME ====\n{outcome.rstrip()}\n\n"
        f"==== FEATURE DIAGNOSTICS (TOON) ====\n{toon.rstrip()}\n"
    )
    return Prompt(system, user)


def task_context_prompt(summary: dict) -> Prompt:
    lines = "\n".join(f"- {k}: {v}" for k, v in summary.items())
    return Prompt(
        "You write short domain briefs for a feature-search system.",
        "Summarise this dataset for someone designing features for it, in under 200 "
        f"words:\n{lines}\n",
    )
