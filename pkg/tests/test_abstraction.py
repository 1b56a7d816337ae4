import dataclasses
import json
import random

import pytest

from preopacity.abstraction import (
    AbstractionError,
    BoxUnion,
    ControlSystemSpec,
    QuantizationParams,
    build_abstraction,
    check_delta_iss_empirical,
    check_quantization,
    difference,
    grid,
    inflate_secret,
    iss_violations,
    sample_relation_witness,
    simulate,
    span,
)
from preopacity.dsl import ComparisonFunction, parse_expression
from preopacity.system import validate_system

from conftest import CASE_EPS, CASE_PARAMS


def ids(system, names):
    return sorted(names, key=lambda s: system.coords[s])


def test_span():
    assert span(BoxUnion.of([[0, 12]])) == 12
    assert span(BoxUnion.of([[0, 3]], [[5, 7]])) == 2
    assert span(BoxUnion.of([[0, 3], [1, 1.5]])) == 0.5
    assert span(BoxUnion.of([[0.05, 0.05]])) == 0
    with pytest.raises(AbstractionError):
        span(BoxUnion(()))


def test_difference():
    x = BoxUnion.of([[0, 12]])
    s = BoxUnion.of([[11, 12]])
    assert difference(x, s).boxes == (((0.0, 11.0),),)
    assert difference(s, x).is_empty()
    two = difference(BoxUnion.of([[0, 4], [0, 4]]), BoxUnion.of([[1, 2], [1, 2]]))
    area = sum((b[0][1] - b[0][0]) * (b[1][1] - b[1][0]) for b in two.boxes)
    assert area == pytest.approx(15)


def test_grid():
    assert grid(BoxUnion.of([[0, 12]]), 1.0) == [(float(i),) for i in range(12)]
    assert grid(BoxUnion.of([[8.7, 12]]), 1.0) == [(9.0,), (10.0,), (11.0,)]
    assert grid(BoxUnion.of([[0, 1]]), 0.5) == [(0.0,), (0.5,)]
    assert grid(BoxUnion.of([[0.05, 0.05]]), 0.05) == [(0.05,)]
    assert len(grid(BoxUnion.of([[0, 1], [0, 1]]), 0.25)) == 16
    with pytest.raises(AbstractionError):
        grid(BoxUnion.of([[0, 1]]), 2.0)
    with pytest.raises(AbstractionError):
        grid(BoxUnion.of([[0, 1]]), 0)


def test_grid_covers_domain():
    rng = random.Random(3)
    for eta in (1.0, 0.5, 0.3):
        box = BoxUnion.of([[0, 12]])
        pts = [p[0] for p in grid(box, eta)]
        for _ in range(300):
            x = rng.uniform(0, 12)
            assert min(abs(x - p) for p in pts) <= eta + 1e-9
            assert any(p <= x < p + eta + 1e-9 for p in pts)


def test_inflate_secret():
    x = BoxUnion.of([[0, 12]])
    s = BoxUnion.of([[11, 12]])
    assert inflate_secret(s, 2.3, x).boxes == (((8.7, 12.0),),)
    assert inflate_secret(s, 0, x).boxes == (((11.0, 12.0),),)
    assert inflate_secret(BoxUnion.of([[0, 1]]), 5, x).boxes == (((0.0, 6.0),),)
    with pytest.raises(AbstractionError):
        inflate_secret(s, -1, x)


def test_quantization_case_study_values(case_spec):
    report = check_quantization(case_spec, CASE_PARAMS, CASE_EPS)
    assert report.passed
    sim = report["simulation"]
    assert sim.lhs == pytest.approx(0.2 * 4 / 3.141592653589793 + 1, abs=1e-9)
    assert sim.lhs == pytest.approx(1.25465, abs=1e-5)
    assert sim.rhs == pytest.approx(1.27324, abs=1e-5)
    assert report["inflation"].rhs == 2.3
    assert report["eta-span"].rhs == 1.0
    assert report["mu-span"].passed


def test_quantization_rejects_coarse_grid(case_spec):
    report = check_quantization(case_spec, QuantizationParams(1.1, 0, 2.3), CASE_EPS)
    assert [c.name for c in report.failures] == ["simulation", "eta-span"]
    with pytest.raises(AbstractionError, match="simulation"):
        build_abstraction(case_spec, QuantizationParams(1.1, 0, 2.3), CASE_EPS)
    assert "FAIL" in report.render()


def test_quantization_mu_on_finite_inputs(case_spec):
    report = check_quantization(case_spec, QuantizationParams(1, 0.1, 2.3), CASE_EPS)
    assert not report["mu-span"].passed


def test_case_study_abstraction(case_abs):
    assert len(case_abs.states) == 12
    assert set(case_abs.initial) == set(case_abs.states)
    assert ids(case_abs, case_abs.secret) == ["8", "9", "10", "11"]
    assert len(case_abs.transitions) == 24
    assert case_abs.post("11") == {"2", "3"}
    assert case_abs.post("0") == {"0", "1"}
    assert case_abs.output["5"][0] == pytest.approx(0, abs=1e-12)
    assert case_abs.output["0"] == (1.0,)
    assert case_abs.summary()["outputs"] == [0.0, 0.31, 0.59, 0.81, 0.95, 1.0]
    assert validate_system(case_abs).ok
    assert not case_abs.escaping
    assert case_abs.notes and "8" in case_abs.notes[0]


def test_point_mode(case_spec):
    a = build_abstraction(case_spec, CASE_PARAMS, CASE_EPS, "point")
    assert ids(a, a.secret) == ["9", "10", "11"]
    assert not a.notes
    with pytest.raises(AbstractionError):
        build_abstraction(case_spec, CASE_PARAMS, CASE_EPS, "fuzzy")


def test_secret_mode_ordering(case_spec):
    rng = random.Random(11)
    for _ in range(25):
        theta = rng.uniform(0.9, 4)
        p = QuantizationParams(1, 0, theta)
        cell = build_abstraction(case_spec, p, CASE_EPS, "cell", unsafe=True)
        point = build_abstraction(case_spec, p, CASE_EPS, "point", unsafe=True)
        assert point.secret <= cell.secret
        assert len(cell.secret) - len(point.secret) <= 1


def test_unsafe_builds_anyway(case_spec):
    a = build_abstraction(case_spec, QuantizationParams(1.1, 0, 2.3), CASE_EPS, unsafe=True)
    assert not a.quantization.passed
    assert len(a.states) == 11


def test_simulate(case_spec):
    t = simulate(case_spec, [11], [[0.05]] * 2)
    assert [s[0] for s in t.states] == pytest.approx([11, 2.25, 0.5])
    assert not t.left_domain
    assert simulate(case_spec, [3], []).states == [(3.0,)]
    t = simulate(case_spec, [0.0625], [[0.05]] * 5)
    assert all(s[0] == pytest.approx(0.0625) for s in t.states)
    assert simulate(case_spec, [13], [[0.05]]).left_domain == [0]


def test_delta_iss_case_study(case_spec):
    report = check_delta_iss_empirical(case_spec, samples=300, horizon=10, seed=1)
    assert report.passed


def test_delta_iss_detects_wrong_bounds(case_spec):
    tiny = ComparisonFunction("linear", c=1e-12)
    spec = dataclasses.replace(
        case_spec, beta=ComparisonFunction("kl-exp-linear", c=1e-12, lam=0.2), gamma=tiny
    )
    report = check_delta_iss_empirical(spec, samples=50, horizon=5, seed=2)
    assert not report.passed
    assert iss_violations(spec, (3.0,), (3.0,), [(0.05,)] * 4, [(0.05,)] * 4) == []


def test_relation_witness_sampling(case_spec, case_abs):
    assert sample_relation_witness(case_spec, case_abs, CASE_EPS, samples=300, seed=5) == []


def test_relation_witness_catches_bad_secret(case_spec):
    # shifted dynamics reach the secret set; without inflation a public grid
    # state can step into it
    shifted = dataclasses.replace(case_spec, dynamics=[parse_expression("0.2*x1 + 9.5", 1, 1)])
    bad = build_abstraction(shifted, QuantizationParams(1, 0, 0.5), CASE_EPS, "point", unsafe=True)
    conds = {p["condition"] for p in sample_relation_witness(shifted, bad, CASE_EPS, 400, seed=5)}
    assert "3c" in conds
    good = build_abstraction(shifted, CASE_PARAMS, CASE_EPS, "cell")
    assert sample_relation_witness(shifted, good, CASE_EPS, 400, seed=5) == []


def case_study_dict():
    from conftest import DATA

    return json.loads((DATA / "cosine_case_study.json").read_text())


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d.pop("gamma"), "missing"),
    (lambda d: d.update(extra=1), "unknown"),
    (lambda d: d.update(dynamics=["0.2*x1", "x1"]), "dynamics"),
    (lambda d: d.update(secret_set=[[[11, 13]]]), "contained"),
    (lambda d: d.update(state_set=[[[0, 12], [0, 1]]]), "dimension"),
    (lambda d: d.update(beta={"kind": "linear", "params": {"c": 1}}), "beta"),
    (lambda d: d.update(input_set=[]), "input_set"),
    (lambda d: d.update(output=["abs(x2)"]), "out of range"),
    (lambda d: d.update(state_set=[[[5, 1]]]), "bad interval"),
])
def test_spec_errors(mutate, message):
    d = case_study_dict()
    mutate(d)
    with pytest.raises(ValueError, match=message):
        ControlSystemSpec.from_dict(d)


def test_two_dimensional_spec():
    d = {
        "state_dim": 2, "input_dim": 1,
        "state_set": [[[0, 2], [0, 2]]],
        "secret_set": [[[1.5, 2], [1.5, 2]]],
        "input_set": [[[0, 0.2]]],
        "dynamics": ["0.5*x1 + u1", "0.5*x2"],
        "output": ["x1", "x2"],
        "alpha": {"kind": "linear", "params": {"c": 1}},
        "beta": {"kind": "kl-exp-linear", "params": {"c": 1, "lam": 0.5}},
        "gamma": {"kind": "linear", "params": {"c": 2}},
    }
    spec = ControlSystemSpec.from_dict(d)
    a = build_abstraction(spec, QuantizationParams(0.5, 0.1, 1.3), 1.5)
    assert len(a.states) == 16
    assert len(a.inputs) == 2
    assert validate_system(a).ok
    assert a.output_dim == 2
    assert sample_relation_witness(spec, a, 1.5, samples=100, seed=1) == []
