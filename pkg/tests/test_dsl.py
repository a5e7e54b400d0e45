import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evograph.dsl import (ArityError, DslSyntaxError, Name, UnknownBuiltinError, bind_by_name,
                          canonical_form, dependencies, identity_source, parse, parse_init,
                          rename_reference, to_source, tokenize)

EXAMPLES = [
    "lambda: 1",
    "lambda x: -x ** 2",
    "lambda x: (-x) ** 2",
    "lambda a, b: a - (b - a) / (a * b)",
    "lambda a: 2 ** -a ** 3",
    "lambda a, b: where(a > b, a, b * 0.5)",
    "lambda x, globals: matmul(x, globals[\"W\"]) + globals['b']",
    "lambda seg: @f(seg, mean(seg, axis=1))",
    "lambda x: concat(x, x * 2, axis=1)",
    "lambda x: quantile(x, 0.25, axis=-1)",
    "lambda x: clamp(x, -1, hi=1)",
    "lambda x: 1e-06 + .5 + 3. + 2E3 * x",
]


@pytest.mark.parametrize("src", EXAMPLES)
def test_print_parse_round_trip(src):
    ast = parse(src)
    again = parse(to_source(ast))
    assert again == ast
    assert to_source(again) == to_source(ast)


def test_precedence_and_associativity():
    assert to_source(parse("lambda a, b, c: a - (b - c)")) == "lambda a, b, c: a - (b - c)"
    assert to_source(parse("lambda a, b, c: (a - b) - c")) == "lambda a, b, c: a - b - c"
    assert to_source(parse("lambda a: 2 ** 3 ** a")) == "lambda a: 2 ** 3 ** a"
    assert to_source(parse("lambda a: (2 ** 3) ** a")) == "lambda a: (2 ** 3) ** a"


def test_syntax_errors_carry_positions():
    with pytest.raises(DslSyntaxError) as exc:
        parse("lambda x: x +\n  * 2")
    assert (exc.value.line, exc.value.col) == (2, 3)
    with pytest.raises(DslSyntaxError):
        parse("lambda x x: x")
    with pytest.raises(DslSyntaxError):
        parse("lambda x, x: x")
    with pytest.raises(DslSyntaxError):
        parse("lambda x: a < b < c")
    with pytest.raises(DslSyntaxError):
        parse("lambda x: x $ 2")
    with pytest.raises(DslSyntaxError):
        parse("x + 1")


def test_unknown_builtin_and_arity():
    with pytest.raises(UnknownBuiltinError):
        parse("lambda x: __import__(x)")
    with pytest.raises(UnknownBuiltinError):
        parse("lambda x: eval(x)")
    with pytest.raises(ArityError):
        parse("lambda x: tanh(x, x)")
    with pytest.raises(ArityError):
        parse("lambda x: mean(x, axis=x)")
    with pytest.raises(ArityError):
        parse("lambda x: mean(x, foo=1)")


def test_sandbox_has_no_attribute_or_subscript_access():
    for src in ("lambda x: x.shape", "lambda x: x[0]", "lambda x: open('f')"):
        with pytest.raises((DslSyntaxError, UnknownBuiltinError)):
            parse(src)


def test_init_expressions():
    parse_init("randn(8, 4) * (1.0 / 8.0 ** 0.5)")
    parse_init("tensor([1, 2, 3])")
    with pytest.raises(DslSyntaxError):
        parse_init("x + 1")
    with pytest.raises(UnknownBuiltinError):
        parse_init("mean(ones(3))")


def test_dependencies_classify_names():
    ast = bind_by_name(parse("lambda pre, hist, globals: @f(pre) + globals[\"w\"] * hist"))
    deps = dependencies(ast, declared_inputs=("pre",))
    assert deps.inputs == {"pre"}
    assert deps.nodes == {"hist"}
    assert deps.globals == {"w"}
    assert deps.callables == {"@f"}
    assert deps.upstream == {"hist", "@f"}


def test_bind_by_name_turns_params_into_references():
    ast = bind_by_name(parse("lambda a, b, globals: a / b"))
    assert ast.params == ("globals",)
    assert {n.id for n in [ast.body.left, ast.body.right]} == {"a", "b"}
    assert isinstance(ast.body.left, Name)


def test_canonical_form_ignores_parameter_names_and_spacing():
    a = parse("lambda a, b: a*b + 1")
    b = parse("lambda u,   v:  u * v+1")
    c = parse("lambda u, v: v * u + 1")
    assert canonical_form(a) == canonical_form(b)
    assert canonical_form(a) != canonical_form(c)


def test_identity_and_rename():
    assert identity_source(bind_by_name(parse("lambda pre_mean: pre_mean"))) == "pre_mean"
    assert identity_source(bind_by_name(parse("lambda a: a + 0"))) is None
    ast = rename_reference(bind_by_name(parse("lambda old: @g(old) * old")), "old", "new")
    assert "old" not in to_source(ast)
    ast = rename_reference(parse("lambda x: @g(x)"), "@g", "@h")
    assert to_source(ast) == "lambda x: @h(x)"


def test_tokenizer_tracks_lines():
    toks = tokenize("lambda x:\n  x")
    assert [(t.kind, t.line) for t in toks][-2:] == [("NAME", 2), ("EOF", 2)]


# --- generated expressions -----------------------------------------------------

_names = st.sampled_from(["x", "y", "node_a", "pre"])
_nums = st.one_of(st.integers(0, 1000).map(str), st.floats(0, 1e6, allow_nan=False).map(repr))


def _exprs():
    leaves = st.one_of(_names, _nums, st.just('globals["w"]'))

    def extend(inner):
        return st.one_of(
            st.tuples(inner, st.sampled_from(["+", "-", "*", "/", "**", "<", ">="]), inner)
              .map(lambda t: f"({t[0]}) {t[1]} ({t[2]})"),
            st.tuples(st.sampled_from(["-", "+"]), inner).map(lambda t: f"{t[0]}({t[1]})"),
            st.tuples(st.sampled_from(["tanh", "abs", "exp"]), inner).map(lambda t: f"{t[0]}({t[1]})"),
            st.tuples(st.sampled_from(["mean", "sum", "std"]), inner, st.integers(-2, 1))
              .map(lambda t: f"{t[0]}({t[1]}, axis={t[2]})"),
            st.tuples(inner, inner).map(lambda t: f"@f({t[0]}, {t[1]})"),
            st.tuples(inner, inner).map(lambda t: f"[{t[0]}, {t[1]}]"),
        )
    return st.recursive(leaves, extend, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(_exprs())
def test_generated_round_trip(body):
    src = f"lambda x, y: {body}"
    ast = parse(src)
    printed = to_source(ast)
    assert parse(printed) == ast
    assert to_source(parse(printed)) == printed
