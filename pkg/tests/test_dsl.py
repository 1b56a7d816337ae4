import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from preopacity import dsl
from preopacity.dsl import (
    BinOp,
    Call,
    ComparisonFunction,
    EvaluationError,
    ExpressionError,
    Neg,
    Num,
    Pi,
    Var,
    alpha_inverse,
    eval_beta,
    eval_gamma,
    evaluate,
    parse_expression,
    to_string,
)


def test_parse_case_study_dynamics():
    e = parse_expression("0.2*x1 + u1", 1, 1)
    assert e == BinOp("+", BinOp("*", Num(0.2), Var("x", 1)), Var("u", 1))


def test_parse_case_study_output():
    e = parse_expression("abs(cos(0.1*pi*x1))", 1)
    assert e == Call("abs", (Call("cos", (BinOp("*", BinOp("*", Num(0.1), Pi()), Var("x", 1)),)),))


def test_syntax_error_position():
    with pytest.raises(ExpressionError) as exc:
        parse_expression("0.2**", 1)
    assert exc.value.position == 4


@pytest.mark.parametrize("text, n, m, pos", [
    ("x2", 1, 0, 0),
    ("u1", 1, 0, 0),
    ("foo(x1)", 1, 0, 0),
    ("1 + y", 1, 0, 4),
    ("min(x1)", 1, 0, 0),
    ("cos(x1, x1)", 1, 0, 0),
    ("(x1", 1, 0, 3),
    ("x1 $ 2", 1, 0, 3),
    ("", 1, 0, 0),
])
def test_parse_errors(text, n, m, pos):
    with pytest.raises(ExpressionError) as exc:
        parse_expression(text, n, m)
    assert exc.value.position == pos


def test_precedence():
    assert evaluate(parse_expression("1 + 2 * 3", 0)) == 7
    assert evaluate(parse_expression("(1 + 2) * 3", 0)) == 9
    assert evaluate(parse_expression("8 / 4 / 2", 0)) == 1
    assert evaluate(parse_expression("2 - 3 - 4", 0)) == -5
    assert evaluate(parse_expression("-2 * -3", 0)) == 6
    assert evaluate(parse_expression("max(1, min(5, 3)) - sqrt(4)", 0)) == 1


def test_evaluate_case_study_expressions():
    f = parse_expression("0.2*x1+u1", 1, 1)
    assert evaluate(f, [11], [0.05]) == pytest.approx(2.25, abs=1e-12)
    h = parse_expression("abs(cos(0.1*pi*x1))", 1)
    assert abs(evaluate(h, [5])) <= 1e-12
    assert evaluate(h, [0]) == 1


def test_evaluation_errors():
    with pytest.raises(EvaluationError):
        evaluate(parse_expression("1 / (x1 - 1)", 1), [1])
    with pytest.raises(EvaluationError):
        evaluate(parse_expression("sqrt(x1)", 1), [-1])
    with pytest.raises(EvaluationError):
        evaluate(parse_expression("exp(x1)", 1), [1e6])
    with pytest.raises(EvaluationError):
        evaluate(parse_expression("x1 + u1", 1, 1), [1], [])


def expressions(n=2, m=1):
    leaves = st.one_of(
        st.floats(0, 100, allow_nan=False).map(Num),
        st.just(Pi()),
        st.integers(1, n).map(lambda i: Var("x", i)),
        st.integers(1, m).map(lambda i: Var("u", i)),
    )

    def extend(children):
        return st.one_of(
            children.map(Neg),
            st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: BinOp(*t)),
            st.tuples(st.sampled_from(sorted(dsl.UNARY_FUNCS)), children).map(
                lambda t: Call(t[0], (t[1],))),
            st.tuples(st.sampled_from(["min", "max"]), children, children).map(
                lambda t: Call(t[0], (t[1], t[2]))),
        )

    return st.recursive(leaves, extend, max_leaves=12)


@given(expressions())
def test_print_parse_round_trip(e):
    text = to_string(e)
    assert parse_expression(text, 2, 1) == e
    assert to_string(parse_expression(text, 2, 1)) == text


def test_constant_expressions():
    assert dsl.constant("0.1*pi") == pytest.approx(0.1 * math.pi)
    assert dsl.constant(2) == 2.0
    with pytest.raises(ExpressionError):
        dsl.constant("x1")
    with pytest.raises(ExpressionError):
        dsl.constant(None)


def test_alpha_inverse():
    alpha = ComparisonFunction("linear", c=0.1 * math.pi)
    assert alpha_inverse(alpha, 0.4) == pytest.approx(4 / math.pi, abs=1e-12)
    assert alpha_inverse(alpha, 0.4) == pytest.approx(1.2732, abs=1e-4)
    assert alpha_inverse(ComparisonFunction("linear", c=1), 0.4) == 0.4
    assert alpha_inverse(ComparisonFunction("power", c=1, p=2), 4) == pytest.approx(2)
    with pytest.raises(ValueError):
        alpha_inverse(ComparisonFunction("kl-exp-linear", c=1, lam=0.5), 1)
    with pytest.raises(ValueError):
        alpha_inverse(alpha, 0)


@given(st.floats(1e-6, 1e3), st.floats(0.1, 10), st.floats(0.2, 4))
def test_alpha_inverse_is_inverse(eps, c, p):
    for fn in (ComparisonFunction("linear", c=c), ComparisonFunction("power", c=c, p=p)):
        assert abs(fn(alpha_inverse(fn, eps)) - eps) <= 1e-9 * max(1.0, eps)


def test_beta_gamma():
    beta = ComparisonFunction("kl-exp-linear", c=1, lam=0.2)
    gamma = ComparisonFunction("linear", c=2)
    assert eval_beta(beta, 1.2732, 1) == pytest.approx(0.25464, abs=1e-5)
    assert eval_gamma(gamma, 0) == 0
    assert eval_beta(beta, 3.5, 0) == 3.5
    with pytest.raises(ValueError):
        eval_beta(gamma, 1, 1)
    with pytest.raises(ValueError):
        eval_gamma(beta, 1)


@pytest.mark.parametrize("fn", [
    ComparisonFunction("linear", c=0.3),
    ComparisonFunction("power", c=2, p=0.5),
    ComparisonFunction("power", c=0.5, p=3),
])
def test_class_kinf_sampled(fn):
    rs = [i * 0.37 for i in range(200)]
    vals = [fn(r) for r in rs]
    assert vals[0] == 0
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert fn(1e6) > 100 * fn(1)


def test_class_kl_sampled():
    fn = ComparisonFunction("kl-exp-linear", c=1.5, lam=0.7)
    for k in range(5):
        vals = [fn(i * 0.5, k) for i in range(50)]
        assert vals[0] == 0 and all(b > a for a, b in zip(vals, vals[1:]))
    for r in (0.1, 1, 10):
        vals = [fn(r, k) for k in range(60)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-8 * r + 1e-8


@pytest.mark.parametrize("kwargs", [
    dict(kind="linear", c=0),
    dict(kind="power", c=1, p=0),
    dict(kind="kl-exp-linear", c=1, lam=1.0),
    dict(kind="quadratic", c=1),
])
def test_comparison_function_validation(kwargs):
    with pytest.raises(ValueError):
        ComparisonFunction(**kwargs)


def test_comparison_function_json():
    fn = ComparisonFunction.from_dict({"kind": "linear", "params": {"c": "0.1*pi"}})
    assert fn.c == pytest.approx(0.1 * math.pi)
    back = ComparisonFunction.from_dict(fn.to_dict())
    assert back == fn
    with pytest.raises(ValueError):
        ComparisonFunction.from_dict({"kind": "power", "params": {"c": 1}})
