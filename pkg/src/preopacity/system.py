"""Finite metric transition systems with secret states.

A :class:`MetricSystem` is the finite object every verification routine in
this package works on.  States and inputs are opaque strings, outputs are
real vectors compared under the infinity norm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

# Absolute slack for every "<=" between reals (output distances, grid
# membership).  Decimal literals such as 3.1 - 2.9 are not exact in binary.
TOL = 1e-9


class ModelError(ValueError):
    """Raised for malformed systems or queries on undeclared states/inputs."""


@dataclass(frozen=True)
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    deadlocks: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


class MetricSystem:
    """Finite metric system ``(X, X0, XS, U, ->, Y, H)``.

    Construction does not validate; call :func:`validate_system` (or
    :meth:`checked`) before handing a system to the verifiers.  Instances are
    treated as immutable once built.
    """

    def __init__(
        self,
        states: Iterable[str],
        initial: Iterable[str],
        secret: Iterable[str],
        inputs: Iterable[str],
        transitions: Iterable[tuple[str, str, str]],
        output: Mapping[str, Iterable[float]],
    ):
        self.states: tuple[str, ...] = tuple(dict.fromkeys(states))
        self.initial: frozenset[str] = frozenset(initial)
        self.secret: frozenset[str] = frozenset(secret)
        self.inputs: tuple[str, ...] = tuple(dict.fromkeys(inputs))
        self.transitions: frozenset[tuple[str, str, str]] = frozenset(
            tuple(t) for t in transitions
        )
        self.output = MappingProxyType(
            {s: tuple(float(c) for c in y) for s, y in output.items()}
        )

        post: dict[str, dict[str, set[str]]] = {s: {} for s in self.states}
        for x, u, x2 in self.transitions:
            post.setdefault(x, {}).setdefault(u, set()).add(x2)
        self._post = {
            x: {u: frozenset(v) for u, v in by_u.items()} for x, by_u in post.items()
        }
        self._any_post = {
            x: frozenset().union(*by_u.values()) for x, by_u in self._post.items()
        }
        self._state_set = frozenset(self.states)
        self._input_set = frozenset(self.inputs)

    def __repr__(self):
        return (
            f"MetricSystem(|X|={len(self.states)}, |X0|={len(self.initial)}, "
            f"|XS|={len(self.secret)}, |U|={len(self.inputs)}, "
            f"|->|={len(self.transitions)})"
        )

    def __eq__(self, other):
        if not isinstance(other, MetricSystem):
            return NotImplemented
        return (
            set(self.states) == set(other.states)
            and self.initial == other.initial
            and self.secret == other.secret
            and set(self.inputs) == set(other.inputs)
            and self.transitions == other.transitions
            and dict(self.output) == dict(other.output)
        )

    __hash__ = None

    @property
    def output_dim(self) -> int:
        dims = {len(y) for y in self.output.values()}
        return dims.pop() if len(dims) == 1 else -1

    def has_state(self, x) -> bool:
        return x in self._state_set

    def require_state(self, x):
        if x not in self._state_set:
            raise ModelError(f"undeclared state {x!r}")

    def require_states(self, xs):
        bad = sorted(set(xs) - self._state_set)
        if bad:
            raise ModelError(f"undeclared states {bad!r}")

    def post(self, x: str) -> frozenset[str]:
        """All successors of ``x`` under any input."""
        return self._any_post.get(x, frozenset())

    def post_set(self, q: Iterable[str]) -> frozenset[str]:
        out: set[str] = set()
        for z in q:
            out |= self._any_post.get(z, frozenset())
        return frozenset(out)

    def edges_from(self, x: str):
        """Sorted ``(input, successor)`` pairs leaving ``x``."""
        return sorted(
            (u, x2) for u, succ in self._post.get(x, {}).items() for x2 in succ
        )

    def is_deadlock(self, x: str) -> bool:
        return not self._any_post.get(x)

    def deadlock_states(self) -> frozenset[str]:
        return frozenset(x for x in self.states if self.is_deadlock(x))

    @property
    def nonblocking(self) -> bool:
        return not self.deadlock_states()

    def checked(self) -> "MetricSystem":
        report = validate_system(self)
        if report.errors:
            raise ModelError("; ".join(report.errors))
        return self


def validate_system(system: MetricSystem) -> ValidationReport:
    """Collect every structural violation and every deadlock state."""
    errors: list[str] = []
    warnings: list[str] = []
    states = set(system.states)
    inputs = set(system.inputs)

    if not system.states:
        errors.append("system has no states")
    if not system.initial:
        errors.append("initial set is empty")
    for name, subset in (("initial", system.initial), ("secret", system.secret)):
        for x in sorted(subset - states):
            errors.append(f"{name} state {x!r} is not declared")
    for x, u, x2 in sorted(system.transitions):
        if x not in states:
            errors.append(f"transition ({x!r}, {u!r}, {x2!r}): source not declared")
        if u not in inputs:
            errors.append(f"transition ({x!r}, {u!r}, {x2!r}): input not declared")
        if x2 not in states:
            errors.append(f"transition ({x!r}, {u!r}, {x2!r}): target not declared")

    dims = set()
    for x in system.states:
        if x not in system.output:
            errors.append(f"state {x!r} has no output")
            continue
        y = system.output[x]
        dims.add(len(y))
        if len(y) == 0:
            errors.append(f"state {x!r} has an empty output vector")
        if not all(math.isfinite(c) for c in y):
            errors.append(f"state {x!r} has a non-finite output {list(y)!r}")
    for x in sorted(set(system.output) - states):
        errors.append(f"output given for undeclared state {x!r}")
    if len(dims) > 1:
        errors.append(f"output dimensions differ across states: {sorted(dims)}")

    deadlocks = [x for x in system.states if system.is_deadlock(x)]
    for x in deadlocks:
        warnings.append(f"deadlock: state {x!r} has no enabled input")
    return ValidationReport(errors, warnings, deadlocks)


def output_distance(y1, y2) -> float:
    """Infinity-norm distance between two output vectors."""
    if len(y1) != len(y2):
        raise ModelError(f"output dimension mismatch: {len(y1)} vs {len(y2)}")
    return max((abs(a - b) for a, b in zip(y1, y2)), default=0.0)


def within(distance: float, bound: float) -> bool:
    return distance <= bound + TOL


def successors(system: MetricSystem, x: str, u: str) -> frozenset[str]:
    system.require_state(x)
    if u not in system._input_set:
        raise ModelError(f"undeclared input {u!r}")
    return system._post.get(x, {}).get(u, frozenset())


def enabled_inputs(system: MetricSystem, x: str) -> frozenset[str]:
    system.require_state(x)
    return frozenset(u for u, succ in system._post.get(x, {}).items() if succ)


def close_states(system: MetricSystem, y, delta: float, among=None) -> frozenset[str]:
    """States (optionally restricted to ``among``) whose output is within
    ``delta`` of ``y``."""
    pool = system.states if among is None else among
    return frozenset(
        z for z in pool if within(output_distance(y, system.output[z]), delta)
    )


# -- JSON ---------------------------------------------------------------------

_TOP_KEYS = {"states", "inputs", "transitions"}
_STATE_KEYS = {"id", "output", "initial", "secret"}
_EDGE_KEYS = {"from", "input", "to"}


def _exact_keys(obj, keys, where):
    if not isinstance(obj, dict):
        raise ModelError(f"{where}: expected an object")
    missing = keys - obj.keys()
    extra = obj.keys() - keys
    if missing:
        raise ModelError(f"{where}: missing fields {sorted(missing)}")
    if extra:
        raise ModelError(f"{where}: unknown fields {sorted(extra)}")


def system_from_dict(data) -> MetricSystem:
    _exact_keys(data, _TOP_KEYS, "system")
    states, initial, secret, output = [], [], [], {}
    for i, st in enumerate(data["states"]):
        _exact_keys(st, _STATE_KEYS, f"states[{i}]")
        sid = str(st["id"])
        if sid in output:
            raise ModelError(f"states[{i}]: duplicate id {sid!r}")
        if not isinstance(st["output"], list) or not all(
            isinstance(c, (int, float)) and not isinstance(c, bool) for c in st["output"]
        ):
            raise ModelError(f"states[{i}]: output must be an array of numbers")
        states.append(sid)
        output[sid] = st["output"]
        if st["initial"]:
            initial.append(sid)
        if st["secret"]:
            secret.append(sid)
    transitions = []
    for i, tr in enumerate(data["transitions"]):
        _exact_keys(tr, _EDGE_KEYS, f"transitions[{i}]")
        transitions.append((str(tr["from"]), str(tr["input"]), str(tr["to"])))
    inputs = [str(u) for u in data["inputs"]]
    return MetricSystem(states, initial, secret, inputs, transitions, output)


def system_to_dict(system: MetricSystem) -> dict:
    return {
        "states": [
            {
                "id": x,
                "output": list(system.output[x]),
                "initial": x in system.initial,
                "secret": x in system.secret,
            }
            for x in system.states
        ],
        "inputs": list(system.inputs),
        "transitions": [
            {"from": x, "input": u, "to": x2} for x, u, x2 in sorted(system.transitions)
        ],
    }


def load_system(path) -> MetricSystem:
    with open(path) as fh:
        return system_from_dict(json.load(fh))


def dump_system(system: MetricSystem, path) -> None:
    with open(path, "w") as fh:
        json.dump(system_to_dict(system), fh, indent=2)
        fh.write("\n")
