"""Finite abstractions of discrete-time control systems.

Sets are finite unions of axis-aligned boxes.  Boxes are half-open
``[lo, hi)`` per axis; an axis with ``lo == hi`` is a single point (used for
finite input sets such as ``{0.05}``).  Grid points are kept as integer index
vectors and only turned into floats as ``k * pitch``.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from . import dsl
from .dsl import ComparisonFunction, alpha_inverse, eval_beta, eval_gamma
from .system import TOL, MetricSystem

Box = tuple  # tuple of (lo, hi) per axis
SECRET_MODES = ("cell", "point")


class AbstractionError(ValueError):
    pass


# -- box unions ------------------------------------------------------------------

@dataclass(frozen=True)
class BoxUnion:
    boxes: tuple

    def __post_init__(self):
        boxes = tuple(tuple((float(lo), float(hi)) for lo, hi in b) for b in self.boxes)
        dims = {len(b) for b in boxes}
        if len(dims) > 1:
            raise AbstractionError(f"boxes of different dimensions: {sorted(dims)}")
        for b in boxes:
            for lo, hi in b:
                if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                    raise AbstractionError(f"bad interval [{lo}, {hi}]")
        object.__setattr__(self, "boxes", boxes)

    @classmethod
    def of(cls, *boxes) -> "BoxUnion":
        return cls(tuple(boxes))

    @property
    def dim(self) -> int:
        return len(self.boxes[0]) if self.boxes else 0

    def is_empty(self) -> bool:
        return not self.boxes

    def is_point_set(self) -> bool:
        return bool(self.boxes) and all(lo == hi for b in self.boxes for lo, hi in b)

    def points(self) -> list[tuple]:
        if not self.is_point_set():
            raise AbstractionError("not a finite point set")
        return sorted({tuple(lo for lo, _ in b) for b in self.boxes})

    def contains(self, x: Sequence[float]) -> bool:
        return any(_box_contains(b, x) for b in self.boxes)

    def to_list(self) -> list:
        return [[list(iv) for iv in b] for b in self.boxes]


def _box_contains(b, x) -> bool:
    for (lo, hi), v in zip(b, x):
        if lo == hi:
            if abs(v - lo) > TOL:
                return False
        elif not (lo - TOL <= v < hi - TOL):
            return False
    return True


def _intersect(b1, b2):
    out = []
    for (l1, h1), (l2, h2) in zip(b1, b2):
        lo, hi = max(l1, l2), min(h1, h2)
        if hi <= lo:
            return None
        out.append((lo, hi))
    return tuple(out)


def _subtract_box(b, c):
    """``b \\ c`` as disjoint half-open boxes."""
    if _intersect(b, c) is None:
        return [b]
    pieces = []
    rest = list(b)
    for i, ((lo, hi), (clo, chi)) in enumerate(zip(b, c)):
        if lo < clo:
            piece = list(rest)
            piece[i] = (lo, clo)
            pieces.append(tuple(piece))
        if chi < hi:
            piece = list(rest)
            piece[i] = (chi, hi)
            pieces.append(tuple(piece))
        rest[i] = (max(lo, clo), min(hi, chi))
    return pieces


def difference(a: BoxUnion, b: BoxUnion) -> BoxUnion:
    """``a \\ b`` for full-dimensional boxes; the split is axis-ordered, so
    ``span`` of the result depends on that decomposition."""
    pieces = list(a.boxes)
    for c in b.boxes:
        pieces = [p for piece in pieces for p in _subtract_box(piece, c)]
    return BoxUnion(tuple(pieces))


def span(a: BoxUnion) -> float:
    """Smallest edge length over all boxes."""
    if a.is_empty():
        raise AbstractionError("span of an empty set")
    return min(hi - lo for b in a.boxes for lo, hi in b)


def _index_range(lo, hi, pitch):
    """Integers k with lo <= k*pitch < hi (up to TOL)."""
    k0 = math.ceil((lo - TOL) / pitch)
    k1 = math.ceil((hi - TOL) / pitch)
    return range(k0, k1)


def grid_indices(a: BoxUnion, pitch: float) -> list[tuple]:
    if not pitch > 0:
        raise AbstractionError("grid pitch must be positive")
    if not a.is_point_set() and pitch > span(a) + TOL:
        raise AbstractionError(f"pitch {pitch} exceeds span {span(a)}")
    idx = set()
    for b in a.boxes:
        ranges = []
        for lo, hi in b:
            if lo == hi:
                k = round(lo / pitch)
                ranges.append([k] if abs(k * pitch - lo) <= TOL else [])
            else:
                ranges.append(_index_range(lo, hi, pitch))
        idx.update(itertools.product(*ranges))
    return sorted(idx)


def grid(a: BoxUnion, pitch: float) -> list[tuple]:
    """All points ``k * pitch`` (per axis) inside ``a``, sorted."""
    return [tuple(k * pitch for k in ix) for ix in grid_indices(a, pitch)]


def inflate_secret(secret: BoxUnion, theta: float, domain: BoxUnion) -> BoxUnion:
    """Widen every secret box by ``theta`` per axis and clip to ``domain``."""
    if theta < 0:
        raise AbstractionError("theta must be non-negative")
    out = []
    for s in secret.boxes:
        wide = tuple((lo - theta, hi + theta) for lo, hi in s)
        for d in domain.boxes:
            piece = _intersect(wide, d)
            if piece is not None:
                out.append(piece)
    return BoxUnion(tuple(out))


def _cell_meets(ix, pitch, box) -> bool:
    for k, (lo, hi) in zip(ix, box):
        a = k * pitch
        if not (a < hi - TOL and a + pitch > lo + TOL):
            return False
    return True


# -- control system description ---------------------------------------------------

@dataclass
class ControlSystemSpec:
    state_dim: int
    input_dim: int
    state_set: BoxUnion
    secret_set: BoxUnion
    input_set: BoxUnion
    dynamics: list  # n expressions over x1..xn, u1..um
    output: list  # expressions over x1..xn
    alpha: ComparisonFunction
    beta: ComparisonFunction
    gamma: ComparisonFunction
    source: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if len(self.dynamics) != self.state_dim:
            raise AbstractionError(
                f"{len(self.dynamics)} dynamics expressions for state dimension {self.state_dim}"
            )
        if not self.output:
            raise AbstractionError("at least one output expression is required")
        for name, bu, dim in (
            ("state_set", self.state_set, self.state_dim),
            ("secret_set", self.secret_set, self.state_dim),
            ("input_set", self.input_set, self.input_dim),
        ):
            if bu.boxes and bu.dim != dim:
                raise AbstractionError(f"{name} has dimension {bu.dim}, expected {dim}")
        if self.state_set.is_empty():
            raise AbstractionError("state_set is empty")
        if self.input_set.is_empty():
            raise AbstractionError("input_set is empty")
        for b in self.state_set.boxes + self.secret_set.boxes:
            if any(lo == hi for lo, hi in b):
                raise AbstractionError("state and secret boxes must be non-degenerate")
        if not difference(self.secret_set, self.state_set).is_empty():
            raise AbstractionError("secret_set is not contained in state_set")
        if self.beta.kind != dsl.KL_EXP_LINEAR:
            raise AbstractionError("beta must be of kind kl-exp-linear")
        if not (self.alpha.is_class_kinf and self.gamma.is_class_kinf):
            raise AbstractionError("alpha and gamma must be linear or power")

    def f(self, x, u) -> tuple:
        return tuple(dsl.evaluate(e, x, u) for e in self.dynamics)

    def h(self, x) -> tuple:
        return tuple(dsl.evaluate(e, x, ()) for e in self.output)

    @classmethod
    def from_dict(cls, data) -> "ControlSystemSpec":
        keys = {"state_dim", "input_dim", "state_set", "secret_set", "input_set",
                "dynamics", "output", "alpha", "beta", "gamma"}
        if not isinstance(data, dict):
            raise AbstractionError("control system spec must be a JSON object")
        missing, extra = keys - data.keys(), data.keys() - keys
        if missing or extra:
            raise AbstractionError(
                f"control system spec: missing {sorted(missing)}, unknown {sorted(extra)}"
            )
        n, m = int(data["state_dim"]), int(data["input_dim"])
        return cls(
            n, m,
            BoxUnion(tuple(data["state_set"])),
            BoxUnion(tuple(data["secret_set"])),
            BoxUnion(tuple(data["input_set"])),
            [dsl.parse_expression(s, n, m) for s in data["dynamics"]],
            [dsl.parse_expression(s, n, 0) for s in data["output"]],
            ComparisonFunction.from_dict(data["alpha"]),
            ComparisonFunction.from_dict(data["beta"]),
            ComparisonFunction.from_dict(data["gamma"]),
            source=data,
        )


def load_spec(path) -> ControlSystemSpec:
    with open(path) as fh:
        return ControlSystemSpec.from_dict(json.load(fh))


@dataclass(frozen=True)
class QuantizationParams:
    eta: float
    mu: float
    theta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise AbstractionError("eta must be positive")
        if self.mu < 0:
            raise AbstractionError("mu must be non-negative")
        if not self.theta > 0:
            raise AbstractionError("theta must be positive")


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    passed: bool
    detail: str = ""


@dataclass
class QuantizationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name) -> BoundCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def render(self) -> str:
        lines = []
        for c in self.checks:
            mark = "ok  " if c.passed else "FAIL"
            lines.append(f"[{mark}] {c.name}: {c.lhs:.6g} <= {c.rhs:.6g}  {c.detail}".rstrip())
        return "\n".join(lines)


def check_quantization(
    spec: ControlSystemSpec, params: QuantizationParams, eps: float
) -> QuantizationReport:
    """Evaluate the two quantization inequalities and the grid-pitch limits.

    ``simulation`` : beta(alpha^-1(eps), 1) + gamma(mu) + eta <= alpha^-1(eps)
    ``inflation``  : beta(alpha^-1(eps), 1) + eta <= theta
    """
    r = alpha_inverse(spec.alpha, eps)
    contraction = eval_beta(spec.beta, r, 1)
    lhs1 = contraction + eval_gamma(spec.gamma, params.mu) + params.eta
    lhs2 = contraction + params.eta
    checks = [
        BoundCheck("simulation", lhs1, r, lhs1 <= r + TOL,
                   "beta(alpha^-1(eps),1) + gamma(mu) + eta <= alpha^-1(eps)"),
        BoundCheck("inflation", lhs2, params.theta, lhs2 <= params.theta + TOL,
                   "beta(alpha^-1(eps),1) + eta <= theta"),
    ]
    public = difference(spec.state_set, spec.secret_set)
    limits = [span(spec.secret_set)] if not spec.secret_set.is_empty() else []
    if not public.is_empty():
        limits.append(span(public))
    eta_max = min(limits)
    checks.append(BoundCheck("eta-span", params.eta, eta_max, params.eta <= eta_max + TOL,
                             "eta <= min(span(S), span(X \\ S))"))
    if spec.input_set.is_point_set():
        checks.append(BoundCheck("mu-span", params.mu, 0.0, params.mu == 0,
                                 "finite input set: mu must be 0"))
    else:
        mu_max = span(spec.input_set)
        ok = 0 < params.mu <= mu_max + TOL
        checks.append(BoundCheck("mu-span", params.mu, mu_max, ok, "0 < mu <= span(U)"))
    return QuantizationReport(checks)


# -- construction ----------------------------------------------------------------

def format_coord(v: float) -> str:
    s = f"{v:.12g}"
    return "0" if s == "-0" else s


def point_id(p: Sequence[float]) -> str:
    return ",".join(format_coord(v) for v in p)


class AbstractSystem(MetricSystem):
    """A :class:`MetricSystem` that remembers where its states came from."""

    coords: dict  # state id -> grid point
    input_coords: dict  # input id -> input point
    escaping: list  # state ids whose image f(x_q, u_q) leaves X for some u_q
    quantization: QuantizationReport
    secret_mode: str
    notes: list

    def summary(self) -> dict:
        return {
            "states": len(self.states),
            "transitions": len(self.transitions),
            "inputs": list(self.inputs),
            "secret_states": sorted(self.secret, key=lambda s: self.coords[s]),
            "outputs": sorted({round(y[0], 2) for y in self.output.values()})
            if self.output_dim == 1 else None,
            "escaping": self.escaping,
            "secret_mode": self.secret_mode,
        }


def build_abstraction(
    spec: ControlSystemSpec,
    params: QuantizationParams,
    eps: float,
    secret_mode: str = "cell",
    unsafe: bool = False,
) -> AbstractSystem:
    """Grid abstraction: states ``[X]_eta`` (all initial), inputs ``[U]_mu``,
    ``x -u-> x'`` iff ``|x' - f(x, u)| <= eta``, output ``h`` at grid points.

    ``secret_mode="point"`` marks grid points lying in the theta-inflated
    secret set; ``"cell"`` marks grid points whose cell ``[x, x + eta)``
    meets it.  Raises ``AbstractionError`` if the quantization check fails,
    unless ``unsafe`` is set.
    """
    if secret_mode not in SECRET_MODES:
        raise AbstractionError(f"secret_mode must be one of {SECRET_MODES}")
    report = check_quantization(spec, params, eps)
    if not report.passed and not unsafe:
        failed = ", ".join(f"{c.name} ({c.lhs:.6g} > {c.rhs:.6g})" for c in report.failures)
        raise AbstractionError(f"quantization check failed: {failed}")
    eta = params.eta

    if params.mu == 0:
        if not spec.input_set.is_point_set():
            raise AbstractionError("mu = 0 requires a finite input set")
        upoints = spec.input_set.points()
    else:
        upoints = grid(spec.input_set, params.mu)
    index = grid_indices(spec.state_set, eta)
    if not index or not upoints:
        raise AbstractionError("empty grid")
    ids = {ix: point_id(tuple(k * eta for k in ix)) for ix in index}
    uids = {point_id(u): u for u in upoints}

    inflated = inflate_secret(spec.secret_set, params.theta, spec.state_set)
    secret = []
    for ix in index:
        p = tuple(k * eta for k in ix)
        if secret_mode == "point":
            hit = inflated.contains(p)
        else:
            hit = any(_cell_meets(ix, eta, b) for b in inflated.boxes)
        if hit:
            secret.append(ids[ix])

    transitions = []
    escaping = set()
    for ix in index:
        x = tuple(k * eta for k in ix)
        for uid, u in uids.items():
            fx = spec.f(x, u)
            if not spec.state_set.contains(fx):
                escaping.add(ids[ix])
            ranges = [
                range(math.ceil((v - eta - TOL) / eta), math.floor((v + eta + TOL) / eta) + 1)
                for v in fx
            ]
            for cand in itertools.product(*ranges):
                if cand in ids and max(abs(k * eta - v) for k, v in zip(cand, fx)) <= eta + TOL:
                    transitions.append((ids[ix], uid, ids[cand]))

    states = [ids[ix] for ix in index]
    output = {ids[ix]: spec.h(tuple(k * eta for k in ix)) for ix in index}
    system = AbstractSystem(states, states, secret, list(uids), transitions, output)
    system.coords = {ids[ix]: tuple(k * eta for k in ix) for ix in index}
    system.input_coords = dict(uids)
    system.escaping = sorted(escaping, key=lambda s: system.coords[s])
    system.quantization = report
    system.secret_mode = secret_mode
    system.notes = []
    point_secret = {ids[ix] for ix in index if inflated.contains(tuple(k * eta for k in ix))}
    if secret_mode == "cell" and point_secret != set(secret):
        extra = sorted(set(secret) - point_secret, key=lambda s: system.coords[s])
        system.notes.append(
            f"cell mode marks {extra} secret in addition to the grid points "
            f"inside the inflated secret set"
        )
    return system


# -- trajectories ----------------------------------------------------------------

@dataclass
class Trajectory:
    states: list
    # time indices at which the state lies outside X
    left_domain: list


def simulate(spec: ControlSystemSpec, x0, inputs) -> Trajectory:
    """Iterate the dynamics from ``x0`` under the given input sequence."""
    x = tuple(float(v) for v in x0)
    states = [x]
    left = [] if spec.state_set.contains(x) else [0]
    for k, u in enumerate(inputs, start=1):
        x = spec.f(x, tuple(u))
        states.append(x)
        if not spec.state_set.contains(x):
            left.append(k)
    return Trajectory(states, left)


def _sample_box_union(bu: BoxUnion, rng: random.Random) -> tuple:
    weights = [math.prod((hi - lo) or 1.0 for lo, hi in b) for b in bu.boxes]
    b = rng.choices(bu.boxes, weights=weights)[0]
    return tuple(lo if lo == hi else rng.uniform(lo, hi) for lo, hi in b)


def iss_violations(spec: ControlSystemSpec, x, xp, v, vp) -> list:
    """Time steps at which the two trajectories break the incremental
    stability bound, as ``(k, lhs, rhs)``."""
    t1 = simulate(spec, x, v).states
    t2 = simulate(spec, xp, vp).states
    r0 = max(abs(a - b) for a, b in zip(t1[0], t2[0]))
    dv = max((abs(a - b) for ua, ub in zip(v, vp) for a, b in zip(ua, ub)), default=0.0)
    bad = []
    for k, (a, b) in enumerate(zip(t1, t2)):
        lhs = max(abs(p - q) for p, q in zip(a, b))
        rhs = eval_beta(spec.beta, r0, k) + eval_gamma(spec.gamma, dv)
        if lhs > rhs + TOL:
            bad.append((k, lhs, rhs))
    return bad


@dataclass
class IssReport:
    samples: int
    horizon: int
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations


def check_delta_iss_empirical(
    spec: ControlSystemSpec, samples: int = 1000, horizon: int = 10, seed: int = 0
) -> IssReport:
    """Sample state pairs and input-sequence pairs and test the incremental
    stability bound along both trajectories.  Passing is evidence only."""
    rng = random.Random(seed)
    violations = []
    for i in range(samples):
        x = _sample_box_union(spec.state_set, rng)
        xp = _sample_box_union(spec.state_set, rng)
        v = [_sample_box_union(spec.input_set, rng) for _ in range(horizon)]
        vp = [_sample_box_union(spec.input_set, rng) for _ in range(horizon)]
        for k, lhs, rhs in iss_violations(spec, x, xp, v, vp):
            violations.append({"sample": i, "k": k, "x": x, "x'": xp, "lhs": lhs, "rhs": rhs})
    return IssReport(samples, horizon, violations)


def sample_relation_witness(
    spec: ControlSystemSpec,
    abstraction: AbstractSystem,
    eps: float,
    samples: int = 1000,
    seed: int = 0,
) -> list:
    """Randomised one-step check of ``R = {(x, x_q) : |x - x_q| <= alpha^-1(eps)}``.

    For sampled concrete states ``x`` and every related grid state, checks
    output closeness (2), that the concrete step is matched (3a), that every
    abstract step is matched by the concrete step under the same input (3b),
    and that non-secret abstract successors are matched by non-secret
    concrete ones (3c).  Returns the list of violations.
    """
    rng = random.Random(seed)
    radius = alpha_inverse(spec.alpha, eps)
    grid_pts = abstraction.coords
    problems = []

    def near(p, q):
        return max(abs(a - b) for a, b in zip(p, q)) <= radius + TOL

    for i in range(samples):
        x = _sample_box_union(spec.state_set, rng)
        related = [s for s, p in grid_pts.items() if near(x, p)]
        if not related:
            problems.append({"sample": i, "x": x, "condition": "R", "detail": "no related grid state"})
        if spec.input_set.is_point_set():
            concrete_inputs = spec.input_set.points()
        else:
            concrete_inputs = [_sample_box_union(spec.input_set, rng)]
        for xq in related:
            if max(abs(a - b) for a, b in zip(spec.h(x), abstraction.output[xq])) > eps + TOL:
                problems.append({"sample": i, "x": x, "xq": xq, "condition": "2"})
            abs_succ = [grid_pts[s] for s in abstraction.post(xq)]
            for u in concrete_inputs:
                x2 = spec.f(x, u)
                if not any(near(x2, p) for p in abs_succ):
                    problems.append({"sample": i, "x": x, "xq": xq, "u": u, "condition": "3a"})
            for uid, xq2 in abstraction.edges_from(xq):
                x2 = spec.f(x, abstraction.input_coords[uid])
                if not spec.state_set.contains(x2) or not near(x2, grid_pts[xq2]):
                    problems.append({"sample": i, "x": x, "xq": xq, "to": xq2, "condition": "3b"})
                    continue
                if xq2 not in abstraction.secret and spec.secret_set.contains(x2):
                    problems.append({"sample": i, "x": x, "xq": xq, "to": xq2, "condition": "3c"})
    return problems
