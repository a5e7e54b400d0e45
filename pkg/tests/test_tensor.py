import json

import numpy as np
import pytest

import helpers
import oracles
from evograph.graph import load_graph
from evograph.graph.configs import enumerate_configs
from evograph.tensor import (AppendOnlyViolation, Dataset, DatasetError, EvalCache, EvalError,
                             GlobalsStore, evaluate_init, evaluate_node, evaluate_outputs,
                             grad_globals, load_dataset, read_manifest, save_dataset,
                             tape_outputs)
from evograph.tensor import ops
from evograph.tensor.autodiff import Var, backward, grad_of, value_of

LOSS = "lambda F, y: mean(sum(F * (F + 1), axis=1) * (y + 0.5), axis=0)"


def _loss_np(F, y):
    return float(np.mean((F * (F + 1)).sum(axis=1) * (y + 0.5)))


def _grad_dataset(seed=0, n=12, length=6):
    rng = np.random.default_rng(seed)
    return Dataset({"x": rng.normal(size=(n, length))}, (np.arange(n) % 2))


def _expression_graph(body, ds):
    text = ("'@globals':\n  a: 'randn(1) * 0.5 + 0.7'\n  b: 'randn(6) * 0.5'\n"
            f"output:\n- 'lambda x, globals: mean(({body}) + x * 0, axis=1)'\n"
            f"- 'lambda x, globals: std(({body}) + x, axis=1)'\n")
    return load_graph(text, ds.input_names, seed=3)


def gradient_check(graph, ds, h=1e-4):
    """Relative error of tape gradients against central differences, or None near a kink."""
    config = enumerate_configs(graph)[0]
    values = {k: v.astype(np.float64) for k, v in graph.globals.values().items()}
    y = ds.labels.astype(np.float64)

    def f_of(name):
        def f(v):
            matrix, _, _ = tape_outputs(graph, config, ds, {**values, name: v})
            return _loss_np(np.asarray(value_of(matrix)), y)
        return f

    grads = grad_globals(graph, config, ds, LOSS)
    worst = 0.0
    for name, v in values.items():
        fd = oracles.central_difference(f_of(name), v, h)
        fd_half = oracles.central_difference(f_of(name), v, h / 2)
        scale = max(np.abs(fd).max(), np.abs(grads[name]).max(), 1e-8)
        if np.abs(fd - fd_half).max() > 1e-3 * scale:
            return None  # a clamp/where boundary sits within the step
        worst = max(worst, float(np.abs(grads[name] - fd).max() / scale))
    return worst


def test_random_expression_gradients_match_finite_differences():
    ds = _grad_dataset()
    rng = np.random.default_rng(0)
    checked, tried = 0, 0
    while checked < 40 and tried < 400:
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
        err = gradient_check(graph, ds)
        if err is None:
            continue
        assert err < 1e-4, body
        checked += 1
    assert checked >= 40


@pytest.mark.parametrize("src", [
    "lambda x, globals: matmul(x, globals[\"W\"])",
    "lambda x, globals: conv1d(x * globals[\"s\"], globals[\"k\"], dilation=2)",
    "lambda x, globals: rfft_power(x * globals[\"s\"], axis=1)",
    "lambda x, globals: quantile(x * globals[\"s\"], 0.3, axis=1)",
    "lambda x, globals: median(x * globals[\"s\"] + globals[\"c\"], axis=1)",
    "lambda x, globals: var(x * globals[\"s\"], axis=1)",
    "lambda x, globals: concat(slice(x * globals[\"s\"], 1, 4, axis=1), x * globals[\"c\"], axis=1)",
    "lambda x, globals: diff(x * globals[\"s\"] * x, axis=1)",
    "lambda x, globals: max(x * globals[\"s\"], axis=1) + min(x + globals[\"c\"], axis=1)",
    "lambda x, globals: max2(x * globals[\"s\"], x + 0.5) - min2(x, globals[\"c\"] * x)",
    "lambda x, globals: relu(x * globals[\"s\"] + 0.123) + sign(x) * abs(x * globals[\"c\"] + 0.05)",
    "lambda x, globals: log(sqrt(x * x * globals[\"s\"] * globals[\"s\"] + 1)) ** globals[\"c\"]",
])
def test_builtin_gradients(src):
    ds = _grad_dataset(1)
    text = ("'@globals':\n  W: 'randn(6, 3)'\n  k: 'randn(2, 3)'\n  s: 'ones(1) * 1.3'\n"
            f"  c: 'ones(1) * 0.4'\noutput:\n- '{src}'\n")
    graph = load_graph(text, ds.input_names)
    err = gradient_check(graph, ds)
    assert err is not None and err < 1e-4


def test_unused_globals_get_zero_gradient():
    ds = _grad_dataset()
    graph = load_graph("'@globals':\n  a: 'ones(1)'\n  z: 'ones(3)'\n"
                       "output:\n- 'lambda x, globals: mean(x * globals[\"a\"], axis=1)'\n",
                       ds.input_names)
    grads = grad_globals(graph, enumerate_configs(graph)[0], ds, LOSS)
    assert np.all(grads["z"] == 0)
    assert np.any(grads["a"] != 0)


def test_autodiff_accumulates_shared_subexpressions():
    a = Var(np.array([2.0, 3.0]))
    b = ops.binary("*", a, a)
    c = ops.binary("+", b, a)
    total = ops.IMPLS["sum"](c)
    g = grad_of(backward(total), a)
    np.testing.assert_allclose(g, 2 * a.value + 1)


def test_cache_is_transparent_and_never_recomputes():
    ds = helpers.small_dataset(1)
    for seed in range(20):
        graph = load_graph(helpers.random_graph_text(np.random.default_rng(seed)), ds.input_names)
        cache = EvalCache()
        for config in enumerate_configs(graph, cap=64):
            try:
                plain = evaluate_outputs(graph, config, ds)
            except EvalError as exc:
                with pytest.raises(EvalError) as again:
                    evaluate_outputs(graph, config, ds, cache)
                assert str(again.value) == str(exc)
                continue
            cached = evaluate_outputs(graph, config, ds, cache)
            assert cached.names == plain.names
            assert np.array_equal(cached.values, plain.values)
        assert cache.recomputations == 0
        assert cache.hits > 0


def test_failures_are_attributed_to_the_failing_alternative():
    ds = helpers.small_dataset()
    graph = load_graph("bad:\n- 'lambda x: log(x - 100)'\nok:\n- 'lambda bad: bad + 1'\n"
                       "output:\n- 'lambda ok: mean(ok, axis=1)'\n- 'lambda x: mean(x, axis=1)'\n",
                       ds.input_names)
    config = enumerate_configs(graph)[0]
    fm = evaluate_outputs(graph, config, ds)
    assert fm.n_columns == 1
    [(out_id, origin, msg)] = fm.failures
    assert origin == graph.nodes["bad"][0].id
    assert "non-finite" in msg
    with pytest.raises(EvalError) as exc:
        evaluate_node(graph, config, "ok", ds)
    assert exc.value.alt_id == graph.nodes["bad"][0].id


def test_callables_and_positional_arguments():
    ds = helpers.small_dataset()
    graph = load_graph("'@sq':\n- 'lambda a, b: a * a - b'\n"
                       "output:\n- 'lambda x, z: mean(@sq(x, z), axis=1)'\n", ds.input_names)
    fm = evaluate_outputs(graph, enumerate_configs(graph)[0], ds, dtype=np.float64)
    x, z = ds.tensors["x"].astype(np.float64), ds.tensors["z"].astype(np.float64)
    np.testing.assert_allclose(fm.values[:, 0], (x * x - z).mean(1), rtol=1e-6)
    bad = load_graph("'@sq':\n- 'lambda a, b: a * b'\noutput:\n- 'lambda x: mean(@sq(x), axis=1)'\n",
                     ds.input_names)
    with pytest.raises(EvalError, match="expects 2 arguments"):
        evaluate_outputs(bad, enumerate_configs(bad)[0], ds)


def test_multi_column_outputs_are_named_by_index():
    ds = helpers.small_dataset()
    graph = load_graph("output:\n- 'lambda x: slice(x, 0, 3, axis=1)'\n", ds.input_names)
    fm = evaluate_outputs(graph, enumerate_configs(graph)[0], ds)
    alt = graph.nodes["output"][0].id
    assert fm.names == [f"{alt}[0]", f"{alt}[1]", f"{alt}[2]"]
    assert fm.values.dtype == np.float32


def test_globals_store_is_append_only_and_seeded():
    store = GlobalsStore(seed=5).add("w", "randn(3, 2) * 0.1")
    with pytest.raises(AppendOnlyViolation):
        store.add("w", "zeros(2)")
    again = GlobalsStore(seed=5).add("w", "randn(3, 2) * 0.1")
    assert np.array_equal(store["w"].value, again["w"].value)
    assert store["w"].value.dtype == np.float32
    other = GlobalsStore(seed=6).add("w", "randn(3, 2) * 0.1")
    assert not np.array_equal(store["w"].value, other["w"].value)
    trained = store.with_values({"w": np.ones((3, 2))})
    assert trained["w"].trained and not store["w"].trained
    assert store.drop(["w"]).names == ()


def test_init_builtins():
    rng = np.random.default_rng(0)
    np.testing.assert_array_equal(evaluate_init("tensor([1, 2, 4])", rng), [1, 2, 4])
    assert evaluate_init("eye(3)", rng).shape == (3, 3)
    np.testing.assert_array_equal(evaluate_init("arange(4) * 2", rng), [0, 2, 4, 6])
    with pytest.raises(ValueError):
        evaluate_init("zeros(0)", rng)


def test_dataset_round_trip(tmp_path):
    ds = helpers.small_dataset()
    save_dataset(ds, tmp_path, {"note": "x"})
    back = load_dataset(tmp_path)
    assert back.input_names == ds.input_names
    for k in ds.tensors:
        assert np.array_equal(back.tensors[k], ds.tensors[k])
    assert np.array_equal(back.labels, ds.labels)
    assert read_manifest(tmp_path)["metadata"] == {"note": "x"}


def test_dataset_validation(tmp_path):
    with pytest.raises(DatasetError):
        Dataset({"x": np.zeros((3, 2))}, [0, 1, 2])
    with pytest.raises(DatasetError):
        Dataset({"x": np.zeros((4, 2))}, [0, 1, 0])
    with pytest.raises(DatasetError):
        Dataset({"seg_mask": np.full((3, 2), 0.5)}, [0, 1, 0])
    save_dataset(helpers.small_dataset(), tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    manifest["tensors"]["x"]["dtype"] = "f64"
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(DatasetError):
        load_dataset(tmp_path)
    manifest["tensors"]["x"].update(dtype="f32", shape=[5, 5])
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(DatasetError):
        load_dataset(tmp_path)
