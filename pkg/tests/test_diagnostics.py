from pathlib import Path

import numpy as np
import pytest

import helpers
from evograph.diagnostics import (FEATURE_FIELDS, SUBNODE_FIELDS, ToonFormatError, ToonReport,
                                  build_diagnostics, effect_size, effective_rank, emit_toon,
                                  feature_diagnostics, global_fit, importance, parse_toon,
                                  quantize, quantize_context, redundancy, shap_values)
from evograph.evolution.memorandum import Memorandum, WORD_CAP
from evograph.graph.io import load_graph
from evograph.scorer import ScorerConfig, score_graph

DATA = Path(__file__).parent / "data"
FEATURE_HEADER = ("features[55]{name,depth,ind_auc,imp,sign,corr,max_corr,n_hi_corr,most_corr,"
                  "cluster,cl_size,resid_corr,resid_sq,w_stab}:")


def _fit_instance(rng):
    n, p = int(rng.integers(30, 120)), int(rng.integers(2, 12))
    X = rng.normal(size=(n, p)) * rng.uniform(0.1, 4, size=p)
    y = (X @ rng.normal(size=p) + rng.normal(size=n) > 0).astype(float)
    if y.min() == y.max():
        y[:2] = [0, 1]
    w = rng.uniform(0.2, 2.0, size=n) if rng.random() < 0.5 else None
    return X, y, w


def test_shap_rows_reconstruct_the_prediction():
    rng = np.random.default_rng(5)
    for _ in range(60):
        X, y, w = _fit_instance(rng)
        fit = global_fit(X, y, w)
        phi, base = shap_values(fit.coefficients, fit.Xs)
        np.testing.assert_allclose(phi.sum(axis=1) + base + fit.intercept, fit.prediction,
                                   rtol=0, atol=1e-9)
        imp = importance(fit.coefficients)
        assert abs(imp.sum() - 1.0) <= 1e-9


def test_importance_of_all_zero_coefficients_is_zero():
    assert importance(np.zeros(3)).tolist() == [0.0, 0.0, 0.0]


def test_effective_rank_examples():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.normal(size=(50, 6)))
    assert effective_rank(Q) == pytest.approx(6.0, abs=1e-6)
    u = rng.normal(size=(40, 1))
    assert effective_rank(u @ rng.normal(size=(1, 5))) == pytest.approx(1.0, abs=1e-6)
    full = rng.normal(size=(100, 10))
    dup = full.copy()
    dup[:, 8] = dup[:, 0]
    dup[:, 9] = dup[:, 1]
    assert effective_rank(dup) < 10
    assert effective_rank(dup) < effective_rank(full) <= 10
    with pytest.raises(ValueError):
        effective_rank(np.zeros((4, 3)))


def test_redundancy_clusters_partition_and_argmax_is_mutual():
    rng = np.random.default_rng(3)
    base = rng.normal(size=(200, 3))
    X = np.column_stack([base[:, 0], base[:, 0] + 0.01 * rng.normal(size=200), base[:, 1],
                         base[:, 2], -base[:, 2]])
    red = redundancy(X)
    assert red["cluster"].tolist() == [0, 0, 1, 2, 2]
    assert red["cl_size"].tolist() == [2, 2, 1, 2, 2]
    assert len(set(red["cluster"])) + sum(s - 1 for s in np.bincount(red["cluster"])) == 5
    assert red["most_corr"][0] == 1 and red["most_corr"][1] == 0
    assert red["most_corr"][3] == 4 and red["most_corr"][4] == 3
    assert red["n_hi_corr"].tolist() == [1, 1, 0, 1, 1]


def test_effect_size_matches_cohens_d():
    rng = np.random.default_rng(4)
    col = rng.normal(size=80)
    y = (rng.random(80) < 0.4).astype(float)
    col[y == 1] += 1.5
    a, b = col[y == 1], col[y == 0]
    s = np.sqrt(((len(a) - 1) * a.var(ddof=1) + (len(b) - 1) * b.var(ddof=1)) / (len(a) + len(b) - 2))
    assert effect_size(col, y) == pytest.approx(abs(a.mean() - b.mean()) / s, rel=1e-12)
    assert effect_size(np.ones(10), np.r_[np.zeros(5), np.ones(5)]) == 0.0


def test_feature_diagnostics_fields():
    rng = np.random.default_rng(6)
    X, y, _ = _fit_instance(rng)
    X = np.column_stack([X, np.ones(len(y))])
    names = [f"f{j}" for j in range(X.shape[1])]
    diags, fit = feature_diagnostics(X, y, names)
    assert [d.name for d in diags] == names
    assert diags[-1].imp == 0.0 and diags[-1].ind_auc == 0.5
    assert abs(sum(d.imp for d in diags) - 1) < 1e-9
    assert all(d.sign in "+-" for d in diags)
    with pytest.raises(ValueError):
        feature_diagnostics(X, y, names[:-1])


def test_bundle_on_a_scored_graph(small_ds):
    text = helpers.random_graph_text(np.random.default_rng(2), n_nodes=3)
    graph = load_graph(text, small_ds.input_names)
    report = score_graph(graph, small_ds, ScorerConfig(config_cap=8), phase1_iters=3)
    bundle = build_diagnostics(report, small_ds)
    ctx = bundle.context
    assert ctx["best_config_auc"] == report.best_score
    assert ctx["n_features_best_config"] == len(bundle.features)
    assert ctx["n_configs"] == len(report.per_config)
    assert 1.0 <= ctx["effective_rank"] <= len(bundle.features)
    names = {s.name for s in bundle.subnodes}
    assert all(not n.startswith("output") for n in names)
    rep = parse_toon(bundle.toon(max_features=2, max_subnodes=1))
    assert rep.declared("features") == len(bundle.features)
    assert len(rep.features) == min(2, len(bundle.features))


# --- TOON text -----------------------------------------------------------------


def _random_value(rng, kind):
    if kind == "int":
        return int(rng.integers(-3, 5000))
    if kind == "f3":
        return float(rng.normal() * 10.0 ** rng.integers(-3, 3))
    if kind == "flag":
        return bool(rng.random() < 0.5)
    if kind == "sign":
        return "+-"[int(rng.integers(2))]
    return rng.choice(["output_3", "@activation", "n1:a4", "", "x_y", "meta_gate"])


def _random_report(rng):
    context = {"scoring": "configuration-based", "best_config_auc": float(rng.random()),
               "config_auc_range": [float(rng.random()), float(rng.random())],
               "effective_rank": float(rng.uniform(1, 60)), "n_nodes": int(rng.integers(1, 90)),
               "flagged": bool(rng.random() < 0.5)}
    feats = [{k: _random_value(rng, kind) for k, kind in FEATURE_FIELDS}
             for _ in range(int(rng.integers(0, 12)))]
    subs = [{k: _random_value(rng, kind) for k, kind in SUBNODE_FIELDS}
            for _ in range(int(rng.integers(0, 6)))]
    n_f = len(feats) + int(rng.integers(0, 3)) if rng.random() < 0.3 else None
    return ToonReport(context, feats, subs, n_f, None)


def test_toon_round_trip_on_random_reports():
    rng = np.random.default_rng(8)
    for _ in range(150):
        rep = _random_report(rng)
        text = emit_toon(rep)
        back = parse_toon(text)
        assert back.context == quantize_context(rep.context)
        assert back.features == [quantize(r, FEATURE_FIELDS) for r in rep.features]
        assert back.subnodes == [quantize(r, SUBNODE_FIELDS) for r in rep.subnodes]
        assert back.declared("features") == rep.declared("features")
        assert emit_toon(back) == text


def test_empty_feature_table():
    text = emit_toon({"n_configs": 0})
    assert "features[0]{" + ",".join(k for k, _ in FEATURE_FIELDS) + "}:\n" in text
    assert parse_toon(text).features == []


def test_toon_golden_excerpt_parses():
    rep = parse_toon((DATA / "toon_excerpt.txt").read_text())
    assert rep.context["best_config_auc"] == 0.9577
    assert rep.context["config_auc_range"] == [0.9351, 0.9577]
    assert rep.context["n_features_global"] == 3520
    assert rep.declared("features") == 55 and len(rep.features) == 8
    assert rep.declared("subnodes") == 83 and len(rep.subnodes) == 3
    first = rep.features[0]
    assert first == {"name": "output_0", "depth": 87, "ind_auc": 0.548, "imp": 0.032, "sign": "-",
                     "corr": 0.042, "max_corr": 0.143, "n_hi_corr": 0, "most_corr": "output_13",
                     "cluster": 0, "cl_size": 1, "resid_corr": 0.035, "resid_sq": 0.025,
                     "w_stab": 0.168}
    act = rep.subnodes[0]
    assert act["name"] == "@activation" and act["bttlnk"] is True and act["n_paths"] == 3520
    assert act["cfg_auc_max"] == 0.958


def test_toon_golden_header_is_byte_exact():
    rep = parse_toon((DATA / "toon_excerpt.txt").read_text())
    lines = emit_toon(rep).splitlines()
    assert FEATURE_HEADER in lines
    assert "  output_0,87,0.548,0.032,-,0.042,0.143,0,output_13,0,1,0.035,0.025,0.168" in lines
    assert "  ... (47 more features)" in lines
    assert "  @activation,0,0,T,3520,0.958,0.296,0.978,0.002,0.911,0.291" in lines


@pytest.mark.parametrize("text, fragment", [
    ("context:\n  a: 1\nfeatures[2]{name}:\n", "fields"),
    ("context:\n  a: 1\nfeatures[x]{name}:\n", "malformed header"),
    ("context:\n  a: 1\nwidgets[0]{name}:\n", "unknown table"),
    ("  a: 1\n", "row outside"),
    ("context:\n  a\n", "malformed context"),
])
def test_toon_parse_errors(text, fragment):
    with pytest.raises(ToonFormatError, match=fragment):
        parse_toon(text)


def test_toon_row_count_and_value_errors():
    good = emit_toon({"k": 1}, [{k: _random_value(np.random.default_rng(0), kind)
                                 for k, kind in FEATURE_FIELDS}])
    with pytest.raises(ToonFormatError, match="declares"):
        parse_toon(good.replace("features[1]", "features[3]"))
    row = good.splitlines()[3]
    bad = good.replace(row, row.replace(",", ",x", 1).replace(",x", ",zz", 1))
    with pytest.raises(ToonFormatError, match="line 4"):
        parse_toon(bad)
    with pytest.raises(ToonFormatError, match="separator"):
        emit_toon({}, [{**quantize(parse_toon(good).features[0], FEATURE_FIELDS), "name": "a,b"}])


# --- memorandum ------------------------------------------------------------------


def test_memorandum_golden_excerpt():
    memo = Memorandum.parse((DATA / "memo_excerpt.txt").read_text())
    assert len(memo.outcomes) == 8
    assert memo.outcomes[-1] == "ACCEPTED: 0.955524 -> 0.957219 (D +0.001695)."
    assert memo.state[0].startswith("Effective rank ~ 38.7")
    assert memo.state[6] == ("Crown-jewel signals: output_0, output_13 "
                             "(high ind_auc, low max_corr, decent resid_sq).")
    assert len(memo.works) == 3 and len(memo.failed) == 4 and len(memo.errors) == 4
    assert memo.words <= WORD_CAP
    assert Memorandum.parse(memo.text) == memo
    assert memo.text.startswith("[OUTCOME HISTORY]\n- REJECTED: 0.957715 -> 0.957337")


def test_memorandum_requires_all_sections():
    with pytest.raises(ValueError, match="lacks"):
        Memorandum.parse("[OUTCOME HISTORY]\n- x\n")
    with pytest.raises(ValueError, match="unknown"):
        Memorandum.parse("[HYPOTHESES]\n- x\n")
