"""The structural-break desk scenario shared by the evolution, runtime and acceptance tests."""
from __future__ import annotations

import functools
from pathlib import Path

import yaml

from evograph.runtime import RunConfig
from evograph.synth import synth_dataset
from evograph.tensor import save_dataset

# milder shifts than the synth defaults, so the seed graph starts well below the target
SYNTH = dict(n_series=400, length=128, break_fraction=0.3, seed=7, mean_shift=0.5, var_shift=0.4)

SEED_GRAPH = """\
output:
- 'lambda full: mean(full, axis=1)'
- 'lambda full: std(full, axis=1)'
"""

SEGMENT_STATS = {
    "pre_mean": ["lambda pre, pre_len: sum(pre, axis=1) / pre_len"],
    "post_mean": ["lambda post, post_len: sum(post, axis=1) / post_len"],
    "pre_var": ["lambda pre, pre_len, pre_mean: sum(pre * pre, axis=1) / pre_len - pre_mean * pre_mean"],
}
POST_VAR = "lambda post, post_len, post_mean: sum(post * post, axis=1) / post_len - post_mean * post_mean"
MEAN_DIFF = "lambda pre_mean, post_mean, pre_var: abs(post_mean - pre_mean) / sqrt(pre_var + 1e-6)"
VAR_RATIO = "lambda pre_var, post_var: abs(log((post_var + 1e-6) / (pre_var + 1e-6)))"
INTERACTION = ("lambda pre_mean, post_mean, pre_var, post_var: abs(post_mean - pre_mean) "
               "/ sqrt(pre_var + 1e-6) * abs(log((post_var + 1e-6) / (pre_var + 1e-6)))")
HUBER_G = "lambda r: where(abs(r) <= 1.0, ones_like(r), 1.0 / clamp(abs(r), 1e-6, 1e6))"
BROKEN = "lambda full: log(full)"  # NaN on negative samples

# id of the mean-difference output on island 0: seed outputs take a0, a1 and the
# first mutation allocates in node order (pre_mean, post_mean, pre_var, output)
MEAN_DIFF_ID = "i0a5"


def transcript() -> dict:
    return {"task_context": "Series of length 128; label 1 when the segment after the "
                            "boundary differs in distribution from the one before.",
            "steps": [
                {"hypotheses": "Standardised difference of segment means should separate breaks.",
                 "mutation": {"add": {**SEGMENT_STATS, "output": [MEAN_DIFF]}}},
                {"hypotheses": "A log variance ratio captures scale breaks.",
                 "mutation": {"add": {"post_var": [POST_VAR], "output": [VAR_RATIO]}}},
                {"hypotheses": "Down-weight large residuals with a Huber rule.",
                 "mutation": {"add": {"ridge_g": [HUBER_G]}}},
                {"hypotheses": "Replace the mean difference with an interaction, add a log level.",
                 "mutation": {"remove": [MEAN_DIFF_ID],
                              "add": {"output": [INTERACTION, BROKEN]}}},
                {"hypotheses": "Malformed proposal.", "mutation": "remove: [no_such_id]\n"},
            ]}


GLOBAL_FEATURE = {"add_globals": {"w": "ones(1) * 0.5"},
                  "add": {**SEGMENT_STATS, "post_var": [POST_VAR],
                          "output": [VAR_RATIO,
                                     "lambda full: std(tanh(full * globals[\"w\"]), axis=1)"]}}


def four_island_transcript() -> dict:
    doc = transcript()
    doc["islands"] = {1: [{"hypotheses": "variance ratio with a trained squash",
                           "mutation": GLOBAL_FEATURE}],
                      2: [], 3: []}
    return doc


def final_graph_text() -> str:
    """The graph the transcript should end at, written by hand."""
    lines = [f"{node}:\n- '{src[0]}'" for node, src in SEGMENT_STATS.items()]
    lines += [f"post_var:\n- '{POST_VAR}'", "output:",
              "- 'lambda full: mean(full, axis=1)'", "- 'lambda full: std(full, axis=1)'",
              f"- '{MEAN_DIFF}'", f"- '{VAR_RATIO}'", f"- '{INTERACTION}'",
              f"ridge_g:\n- '{HUBER_G}'"]
    return "\n".join(lines) + "\n"


@functools.lru_cache(maxsize=None)
def dataset():
    return synth_dataset(**SYNTH)


def write_scenario(root: Path, steps: int = 8, islands: int = 1, transcript_doc=None,
                   **config) -> RunConfig:
    """Dataset, seed graph and transcript files under ``root``; returns the run config."""
    root = Path(root)
    ds, meta = dataset()
    data_dir = root / "data"
    if not (data_dir / "manifest.json").exists():
        save_dataset(ds, data_dir, meta)
    (root / "seed.yaml").write_text(SEED_GRAPH)
    (root / "transcript.yaml").write_text(
        yaml.safe_dump(transcript_doc or transcript(), sort_keys=False))
    return RunConfig(dataset=str(data_dir), graph=str(root / "seed.yaml"),
                     provider={"kind": "scripted", "transcript": str(root / "transcript.yaml")},
                     islands=islands, steps=steps, out=str(root / "run"), **config)
