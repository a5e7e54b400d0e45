"""Acceptance criteria 1-11, each checked at its stated size and tolerance.

Every criterion prints one ``criterion N ...: PASS|FAIL`` line; the lines are
repeated in the terminal summary. Run alone with
``python3 -m pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""
import json
import shutil
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

import helpers
import oracles
import scenarios
from evograph.diagnostics import (FEATURE_FIELDS, SUBNODE_FIELDS, ToonReport, emit_toon,
                                  global_fit, importance, parse_toon, quantize, quantize_context,
                                  shap_values)
from evograph.evolution import Memorandum
from evograph.graph import (MutationError, MutationSet, apply_mutation, canonical_key,
                            config_product, dump_graph, dump_mutation, enumerate_configs,
                            load_graph, maintain, node_kind, parse_graph_document, parse_mutation)
from evograph.graph.io import GraphFormatError, globals_arrays
from evograph.runtime import Run, read_events
from evograph.scorer import (ALPHA_GRID, ScorerConfig, loo_errors, phase1_refine, ridge_fit,
                             roc_auc, score_graph, standardize)
from evograph.tensor import Dataset, EvalCache, EvalError, evaluate_outputs, load_dataset, save_dataset
from test_tensor import _expression_graph, _grad_dataset, gradient_check

DATA = Path(__file__).parent / "data"
RESULTS: dict = {}


@contextmanager
def criterion(number: int, title: str):
    info: dict = {}
    start = time.perf_counter()
    try:
        yield info
    except BaseException as exc:
        first = str(exc).strip().splitlines()[0] if str(exc).strip() else ""
        _report(number, title, False, f"{type(exc).__name__}: {first}"[:160])
        raise
    info.setdefault("time", f"{time.perf_counter() - start:.1f}s")
    _report(number, title, True, ", ".join(f"{k} {v}" for k, v in info.items()))


def _report(number, title, ok, detail):
    line = f"criterion {number:2d} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS[number] = line
    print(line)


# --- 1-3: scorer oracles ----------------------------------------------------------------


def test_criterion_01_ridge_matches_normal_equations():
    with criterion(1, "ridge vs normal equations") as info:
        rng = np.random.default_rng(101)
        start = time.perf_counter()
        worst = 0.0
        for i in range(240):
            n, p = int(rng.integers(20, 101)), int(rng.integers(2, 21))
            X = standardize(rng.normal(size=(n, p)) * rng.uniform(0.2, 5, size=p)).Xs
            y = X @ rng.normal(size=p) + rng.normal(size=n)
            w = rng.uniform(0.1, 3.0, size=n) if i % 2 else None
            alpha = float(rng.choice(ALPHA_GRID))
            fit = ridge_fit(X, y, alpha, w)
            beta, b = oracles.ridge_normal_equations(X, y, alpha, oracles.mean_one(w, n))
            scale = max(np.abs(beta).max(), abs(b), 1e-12)
            err = max(np.abs(fit.coefficients - beta).max(), abs(fit.intercept - b)) / scale
            worst = max(worst, err)
        elapsed = time.perf_counter() - start
        assert worst <= 1e-8, f"max relative error {worst:.2e}"
        assert elapsed < 10, f"{elapsed:.1f}s"
        info.update(instances=240, max_rel_err=f"{worst:.1e}", time=f"{elapsed:.2f}s")


def test_criterion_02_loo_matches_explicit_refits():
    with criterion(2, "closed-form LOO vs refits") as info:
        rng = np.random.default_rng(202)
        start = time.perf_counter()
        worst = 0.0
        for i in range(60):
            n, p = int(rng.integers(20, 61)), int(rng.integers(2, 13))
            X = standardize(rng.normal(size=(n, p))).Xs
            y = X @ rng.normal(size=p) + rng.normal(size=n)
            w = rng.uniform(0.2, 2.0, size=n) if i % 2 else None
            for alpha in ALPHA_GRID:
                fast = loo_errors(X, y, alpha, w)
                slow = oracles.loo_refit_residuals(X, y, alpha, w)
                worst = max(worst, abs(np.mean(fast ** 2) - np.mean(slow ** 2)),
                            float(np.abs(fast - slow).max()))
        elapsed = time.perf_counter() - start
        assert worst <= 1e-6, f"max deviation {worst:.2e}"
        assert elapsed < 30
        info.update(instances=60, alphas=len(ALPHA_GRID), max_dev=f"{worst:.1e}",
                    time=f"{elapsed:.2f}s")


def test_criterion_03_auc_is_exact():
    with criterion(3, "AUC vs pair counting") as info:
        rng = np.random.default_rng(303)
        for i in range(1000):
            n = int(rng.integers(2, 501))
            y = (rng.random(n) < rng.uniform(0.1, 0.9)).astype(float)
            y[0], y[1] = 0.0, 1.0
            s = rng.integers(0, 6, size=n).astype(float) if i % 2 else rng.normal(size=n)
            assert roc_auc(s, y) == oracles.auc_pairs(s, y), f"vector {i}"
        info.update(vectors=1000, equality="exact")


# --- 4-5: evaluation ----------------------------------------------------------------------


def test_criterion_04_gradients_match_central_differences():
    with criterion(4, "reverse-mode gradients") as info:
        ds = _grad_dataset()
        rng = np.random.default_rng(404)
        checked = tried = skipped = 0
        worst = 0.0
        while checked < 110 and tried < 2000:
            tried += 1
            body = helpers.random_expression(rng, depth=3)
            if "globals" not in body:
                continue
            try:
                graph = _expression_graph(body, ds)
                F = evaluate_outputs(graph, enumerate_configs(graph)[0], ds, dtype=np.float64).values
            except EvalError:
                continue
            if np.abs(F).max() > 1e4:
                continue
            err = gradient_check(graph, ds, h=1e-4)
            if err is None:
                skipped += 1  # a clamp/where boundary lies within the step
                continue
            assert err < 1e-4, f"{body}: relative error {err:.2e}"
            worst = max(worst, err)
            checked += 1
        assert checked >= 100, f"only {checked} expressions checked"
        info.update(expressions=checked, near_boundary_skipped=skipped, max_rel_err=f"{worst:.1e}")


def test_criterion_05_cache_is_transparent():
    with criterion(5, "evaluation cache transparency") as info:
        ds = helpers.small_dataset(5)
        n_configs = 0
        for seed in range(24):
            graph = load_graph(helpers.random_graph_text(np.random.default_rng(1000 + seed), n_nodes=5),
                               ds.input_names)
            cache = EvalCache()
            for config in enumerate_configs(graph, cap=10**6):
                try:
                    plain = evaluate_outputs(graph, config, ds)
                except EvalError:
                    with pytest.raises(EvalError):
                        evaluate_outputs(graph, config, ds, cache)
                    continue
                cached = evaluate_outputs(graph, config, ds, cache)
                assert cached.names == plain.names
                assert np.array_equal(cached.values, plain.values)
                n_configs += 1
            assert cache.recomputations == 0
        info.update(graphs=24, configs=n_configs, recomputations=0)


# --- 6: diagnostics ---------------------------------------------------------------------------


def test_criterion_06_shap_reconstruction():
    with criterion(6, "SHAP reconstruction and importance") as info:
        rng = np.random.default_rng(606)
        worst_rec = worst_imp = 0.0
        for _ in range(60):
            n, p = int(rng.integers(30, 150)), int(rng.integers(2, 15))
            X = rng.normal(size=(n, p)) * rng.uniform(0.1, 4, size=p)
            y = (X @ rng.normal(size=p) + rng.normal(size=n) > 0).astype(float)
            y[:2] = [0, 1]
            w = rng.uniform(0.2, 2.0, size=n) if rng.random() < 0.5 else None
            fit = global_fit(X, y, w)
            phi, base = shap_values(fit.coefficients, fit.Xs)
            worst_rec = max(worst_rec, float(np.abs(phi.sum(1) + base + fit.intercept - fit.prediction).max()))
            worst_imp = max(worst_imp, abs(importance(fit.coefficients).sum() - 1.0))
        assert worst_rec <= 1e-9 and worst_imp <= 1e-9
        info.update(fits=60, max_recon_err=f"{worst_rec:.1e}", max_imp_dev=f"{worst_imp:.1e}")


# --- 7: graph laws ------------------------------------------------------------------------------


def test_criterion_07_graph_laws():
    with criterion(7, "graph-law suite") as info:
        inputs = ("x", "z")
        counts = 0
        for seed in range(40):
            g = load_graph(helpers.random_graph_text(np.random.default_rng(seed), n_nodes=5), inputs)
            prod = config_product(g)
            for cap in (1, 3, 16, 64, 10**6):
                assert len(enumerate_configs(g, cap=cap, rng=np.random.default_rng(seed))) == min(cap, prod)
                counts += 1
            m, _ = maintain(g)
            assert maintain(m)[0] is m
            # duplicate collapse: re-add every intermediate source with altered spacing
            extra = {n: (alts[0].source.replace(": ", ":  ", 1),) for n, alts in g.nodes.items()
                     if node_kind(n) == "intermediate"}
            dm, _ = maintain(apply_mutation(g, MutationSet(add=extra)).graph)
            for alts in dm.nodes.values():
                keys = [canonical_key(a) for a in alts]
                assert len(keys) == len(set(keys))
            # append-only globals and atomicity under injected errors
            before = dump_graph(g, annotate=True), g.next_id, g.version
            for bad, kind in ((MutationSet(add_globals={"s": "zeros(2)"}), "append_only"),
                              (MutationSet(add={"output": ("lambda x: max(x, axis=1)",),
                                                "loop_a": ("lambda loop_b: loop_b",),
                                                "loop_b": ("lambda loop_a: loop_a",)}), "cycle")):
                with pytest.raises(MutationError) as exc:
                    apply_mutation(g, bad)
                assert exc.value.kind == kind
            with pytest.raises(MutationError) as exc:
                apply_mutation(g, parse_mutation("add:\n  output:\n    - 'lambda x: max(x,'\n"))
            assert exc.value.kind == "parse"
            assert (dump_graph(g, annotate=True), g.next_id, g.version) == before
        info.update(graphs=40, count_checks=counts)


# --- 8: format round trips ------------------------------------------------------------------------


def _random_toon(rng):
    def value(kind):
        if kind == "int":
            return int(rng.integers(0, 4000))
        if kind == "f3":
            return float(rng.normal())
        if kind == "flag":
            return bool(rng.random() < 0.5)
        if kind == "sign":
            return "+-"[int(rng.integers(2))]
        return f"n{int(rng.integers(0, 50))}"
    feats = [{k: value(t) for k, t in FEATURE_FIELDS} for _ in range(int(rng.integers(0, 10)))]
    subs = [{k: value(t) for k, t in SUBNODE_FIELDS} for _ in range(int(rng.integers(0, 5)))]
    ctx = {"best_config_auc": float(rng.random()), "n_configs": int(rng.integers(1, 65)),
           "config_auc_range": [float(rng.random()), float(rng.random())]}
    return ToonReport(ctx, feats, subs, len(feats) + int(rng.integers(0, 3)), None)


def test_criterion_08_format_round_trips(tmp_path):
    with criterion(8, "format round trips and goldens") as info:
        rng = np.random.default_rng(808)
        inputs = ("x", "z")
        for seed in range(100):
            g = load_graph(helpers.random_graph_text(np.random.default_rng(seed),
                                                     n_nodes=seed % 5 + 1, callables=seed % 2 == 0),
                           inputs, seed=seed)
            text = dump_graph(g)
            back = load_graph(text, inputs, seed=seed)
            assert dump_graph(back) == text and back.globals.equals(g.globals)
        for _ in range(100):
            ids = tuple(f"a{int(i)}" for i in rng.integers(0, 40, size=rng.integers(0, 4)))
            add = {f"n{int(rng.integers(0, 9))}": tuple(f"lambda x: x * {int(k)}" for k in
                                                        rng.integers(0, 9, size=rng.integers(1, 3)))
                   for _ in range(int(rng.integers(0, 3)))}
            glob = {"w": "randn(2) * 0.1"} if rng.random() < 0.5 else {}
            m = MutationSet(ids, add, glob)
            assert parse_mutation(dump_mutation(m)) == m
        for _ in range(100):
            rep = _random_toon(rng)
            text = emit_toon(rep)
            back = parse_toon(text)
            assert back.features == [quantize(r, FEATURE_FIELDS) for r in rep.features]
            assert back.subnodes == [quantize(r, SUBNODE_FIELDS) for r in rep.subnodes]
            assert back.context == quantize_context(rep.context)
            assert emit_toon(back) == text
        for i in range(100):
            n = int(rng.integers(4, 20))
            y = np.zeros(n)
            y[: n // 2] = 1
            tensors = {f"t{j}": rng.normal(size=(n, int(rng.integers(1, 6)))).astype(np.float32)
                       for j in range(int(rng.integers(1, 4)))}
            ds = Dataset(tensors, y)
            path = save_dataset(ds, tmp_path / f"ds{i}", {"i": i})
            back = load_dataset(tmp_path / f"ds{i}")
            assert all(np.array_equal(back.tensors[k], ds.tensors[k]) for k in tensors)
            assert np.array_equal(back.labels, ds.labels)
            save_dataset(back, tmp_path / f"re{i}", {"i": i})
            assert (tmp_path / f"re{i}" / "manifest.json").read_text() == path.read_text()
        # goldens
        toon = parse_toon((DATA / "toon_excerpt.txt").read_text())
        assert toon.declared("features") == 55 and len(toon.features) == 8
        assert ("features[55]{name,depth,ind_auc,imp,sign,corr,max_corr,n_hi_corr,most_corr,"
                "cluster,cl_size,resid_corr,resid_sq,w_stab}:") in emit_toon(toon).splitlines()
        mutation = parse_mutation((DATA / "mutation_example.yaml").read_text())
        assert mutation.remove == ("some_alt_id",)
        inits, nodes = parse_graph_document((DATA / "graph_excerpt.yaml").read_text())
        assert list(nodes) == ["@mr_ppv", "output", "ridge_g"] and len(inits) == 7
        with pytest.raises(GraphFormatError):
            load_graph((DATA / "graph_excerpt.yaml").read_text(), ("seg", "mask"))
        memo = Memorandum.parse((DATA / "memo_excerpt.txt").read_text())
        assert len(memo.outcomes) == 8 and Memorandum.parse(memo.text) == memo
        info.update(per_format=100, goldens=4)


# --- 9: end-to-end desk run --------------------------------------------------------------------------


def _desk_run(root: Path, steps: int):
    if (root / "run").exists():
        shutil.rmtree(root / "run")
    config = scenarios.write_scenario(root, steps=steps)
    run = Run.start(config)
    run.run()
    return run, (Path(config.out) / "events.jsonl").read_bytes()


def test_criterion_09_end_to_end_desk_run(tmp_path):
    with criterion(9, "end-to-end desk run") as info:
        start = time.perf_counter()
        run, log_bytes = _desk_run(tmp_path, 30)
        events = [json.loads(line) for line in log_bytes.decode().splitlines()]
        steps = [e["payload"] for e in events if e["type"] == "step"]
        # (a) monotone best-so-far
        best = [p["best_so_far"] for p in steps]
        assert all(b >= a for a, b in zip(best, best[1:]))
        # (b) >= 0.90 within 30 steps, matching a direct scoring of the hand-built graph
        final = run.islands[0].score
        reached = next(i + 1 for i, b in enumerate(best) if b >= 0.90)
        ds = scenarios.dataset()[0]
        oracle = score_graph(load_graph(scenarios.final_graph_text(), ds.input_names), ds,
                             ScorerConfig(), phase1_iters=0).best_score
        assert final >= 0.90 and reached <= 30
        assert abs(final - oracle) <= 0.02, f"run {final:.4f} vs oracle {oracle:.4f}"
        # (c) bit-replayable
        _, again = _desk_run(tmp_path, 30)
        assert again == log_bytes
        # (d) salvage grafts the good half of a half-bad mutation
        salvaged = [p for p in steps if p["status"] == "rejected" and p["salvage"].get("kept")]
        assert salvaged, "no salvage happened"
        p = salvaged[0]
        good, bad = p["mutation"]["added_ids"]
        assert p["salvage"]["kept"] == [good] and bad not in run.islands[0].graph.alt_index
        assert p["incumbent_score"] > p["score_before"] > p["score_after"]
        elapsed = time.perf_counter() - start
        assert elapsed < 300
        info.update(final_auc=f"{final:.4f}", oracle_auc=f"{oracle:.4f}", reached_at_step=reached,
                    salvaged=good, time=f"{elapsed:.1f}s incl. replay")


# --- 10: islands ---------------------------------------------------------------------------------------


def test_criterion_10_island_laws(tmp_path):
    with criterion(10, "island laws") as info:
        doc = scenarios.four_island_transcript()
        config = scenarios.write_scenario(tmp_path, steps=16, islands=4, transcript_doc=doc)
        run = Run.start(config)
        seen, copies = 0, 0
        for until in range(4, 17, 4):
            run.run(until=until, checkpoint_dir=False)
            records = run.log.records()
            for ev in records[seen:]:
                if ev["type"] != "migration":
                    continue
                p = ev["payload"]
                others = {int(k): v for k, v in p["island_scores"].items() if int(k) != p["from"]}
                assert p["to"] == min(others, key=lambda k: (others[k], k))
                donor, target = run.islands[p["from"]], run.islands[p["to"]]
                if donor.score == target.score == p["score"]:
                    assert dump_graph(target.graph) == dump_graph(donor.graph)
                    a, b = globals_arrays(target.graph), globals_arrays(donor.graph)
                    assert a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)
                    copies += 1
            seen = len(records)
        best = [e["payload"] for e in run.log.records() if e["type"] == "global_best"]
        assert all(b["auc"] > a["auc"] and b["version"] == a["version"] + 1
                   for a, b in zip(best, best[1:]))
        n_migrations = sum(e["type"] == "migration" for e in run.log.records())
        assert copies >= 1
        # checkpoint mid-run, restore, finish: the log equals the uninterrupted one
        shutil.rmtree(tmp_path / "run")
        full_cfg = scenarios.write_scenario(tmp_path, steps=12, islands=4, transcript_doc=doc)
        Run.start(full_cfg).run()
        full = (Path(full_cfg.out) / "events.jsonl").read_text()
        shutil.rmtree(tmp_path / "run")
        Run.start(full_cfg).run(until=8)
        Run.restore(Path(full_cfg.out) / "checkpoint").run()
        assert (Path(full_cfg.out) / "events.jsonl").read_text() == full
        info.update(versions=len(best), migrations=n_migrations, verified_copies=copies,
                    restore="log identical")


# --- 11: phase 1 ----------------------------------------------------------------------------------------


def test_criterion_11_phase1_behaviour(tmp_path):
    with criterion(11, "phase-1 refinement") as info:
        ds = helpers.small_dataset(11)
        g = load_graph("'@globals':\n  s: 'ones(1) * 0.2'\n"
                       "output:\n- 'lambda x, globals: mean(tanh(x * globals[\"s\"]) ** 2, axis=1)'\n"
                       "- 'lambda x: std(x, axis=1)'\n", ds.input_names)
        res = phase1_refine(g, enumerate_configs(g)[0], ds, 50)
        traj = res.trajectory
        assert not res.skipped and len(traj) > 2
        assert all(b <= a for a, b in zip(traj, traj[1:])), traj
        assert res.store.values()["s"][0] != np.float32(0.2)
        dead = load_graph("'@globals':\n  s: 'ones(1)'\nunused:\n- 'lambda x, globals: x * globals[\"s\"]'\n"
                          "output:\n- 'lambda x: mean(x, axis=1)'\n", ds.input_names)
        skip = phase1_refine(dead, enumerate_configs(dead)[0], ds, 50)
        assert skip.skipped and skip.reason.startswith("probe")
        # budgets from the event log of a desk run
        if (tmp_path / "run").exists():
            shutil.rmtree(tmp_path / "run")
        config = scenarios.write_scenario(tmp_path, steps=6)
        Run.start(config).run()
        events = read_events(Path(config.out) / "events.jsonl")
        assert [e["payload"]["phase1"]["budget"] for e in events if e["type"] == "init"] == [200]
        budgets = [e["payload"]["phase1"]["budget"] for e in events
                   if e["type"] == "step" and e["payload"]["phase1"]
                   and (e["payload"]["mutation"]["added_ids"] or e["payload"]["mutation"]["remove"])]
        assert budgets and set(budgets) == {20}
        info.update(trajectory_len=len(traj), loss=f"{traj[0]:.4f}->{traj[-1]:.4f}",
                    init_budget=200, step_budget=20)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
