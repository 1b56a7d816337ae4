"""Indicator sets and the observer-based pre-opacity decision."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .estimator import EstimatorState, Observer, build_observer, observer_step
from .system import MetricSystem, ModelError, validate_system


@dataclass(frozen=True)
class IndicatorSet:
    n: int
    members: frozenset


def backward_operator(system: MetricSystem, q: Iterable[str]) -> frozenset:
    """States whose every successor, under every enabled input, lies in ``q``.

    Deadlock states satisfy this vacuously.
    """
    q = frozenset(q)
    system.require_states(q)
    return frozenset(x for x in system.states if system.post(x) <= q)


class IndicatorSequence:
    """Lazy ``T_0, T_1, ...`` with cycle detection.

    Over a finite state set the sequence is eventually periodic, so every
    index resolves after at most ``2^|X|`` applications of the operator, and
    in practice after a handful (the sequence typically hits a fixpoint).
    """

    def __init__(self, system: MetricSystem):
        self.system = system
        self._seq = [frozenset(system.secret)]
        self._seen = {self._seq[0]: 0}
        self.cycle_start: int | None = None
        self.period: int | None = None

    def _grow(self):
        nxt = backward_operator(self.system, self._seq[-1])
        if nxt in self._seen:
            self.cycle_start = self._seen[nxt]
            self.period = len(self._seq) - self.cycle_start
        else:
            self._seen[nxt] = len(self._seq)
            self._seq.append(nxt)

    def __getitem__(self, n: int) -> frozenset:
        if n < 0:
            raise ValueError("indicator index must be non-negative")
        while self.period is None and n >= len(self._seq):
            self._grow()
        if n < len(self._seq):
            return self._seq[n]
        return self._seq[self.cycle_start + (n - self.cycle_start) % self.period]

    def from_index(self, k: int) -> list[tuple[int, frozenset]]:
        """One ``(t, T_t)`` per distinct value taken for ``t >= k``."""
        self[k]
        while self.period is None:
            self._grow()
        out, seen = [], set()
        for t in range(k, max(k, self.cycle_start) + self.period):
            members = self[t]
            if members not in seen:
                seen.add(members)
                out.append((t, members))
        return out


def indicator(system: MetricSystem, n: int) -> IndicatorSet:
    return IndicatorSet(n, IndicatorSequence(system)[n])


@dataclass
class Verdict:
    holds: bool
    delta: float
    k: int
    witness: list[dict] | None = None
    observer_nodes: int = 0
    # indicator index the witness estimate is contained in (k unless blocking)
    horizon: int | None = None
    deadlocks: list[str] = field(default_factory=list)
    method: str = "observer"

    def to_dict(self) -> dict:
        d = {
            "holds": self.holds,
            "delta": self.delta,
            "k": self.k,
            "observer_nodes": self.observer_nodes,
            "witness": self.witness,
        }
        if self.horizon is not None:
            d["horizon"] = self.horizon
        if self.deadlocks:
            d["deadlocks"] = list(self.deadlocks)
        if self.method != "observer":
            d["method"] = self.method
        return d


def _witness_steps(path) -> list[dict]:
    steps = []
    for node, u in path:
        step = {"state": node.x}
        if u is not None:
            step["input"] = u
        step["estimate"] = sorted(node.q)
        steps.append(step)
    return steps


def verify_preopacity(
    system: MetricSystem, delta: float, k: int, observer: Observer | None = None
) -> Verdict:
    """Decide delta-approximate ``k``-step pre-opacity.

    The system is pre-opaque iff no reachable estimator node has its estimate
    inside ``T_k``.  On systems with deadlocks that test alone is not exact
    (a run that cannot be continued still counts as revealing), so there the
    estimate is checked against every ``T_t`` with ``t >= k``; on
    non-blocking systems the two checks coincide.

    Returns a :class:`Verdict` whose witness is a shortest estimator run to a
    violating node, or ``None`` when the property holds.
    """
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    report = validate_system(system)
    if report.errors:
        raise ModelError("; ".join(report.errors))
    obs = observer if observer is not None else build_observer(system, delta)
    seq = IndicatorSequence(system)
    targets = seq.from_index(k) if report.deadlocks else [(k, seq[k])]

    for node in obs.nodes:  # BFS order: first hit is a shortest witness
        for t, members in targets:
            if node.q <= members:
                return Verdict(
                    False, delta, k, _witness_steps(obs.path_to(node)),
                    len(obs), t, report.deadlocks,
                )
    return Verdict(True, delta, k, None, len(obs), None, report.deadlocks)


def extract_witness(verdict: Verdict, system: MetricSystem, delta: float) -> str:
    """Render a violating run with outputs, estimates and indicator membership.

    The run is replayed through :func:`observer_step`; a mismatch with the
    stored estimates raises ``ModelError``.
    """
    if verdict.holds or not verdict.witness:
        raise ValueError("verdict holds; there is no witness to render")
    t = verdict.horizon if verdict.horizon is not None else verdict.k
    target = IndicatorSequence(system)[t]
    steps = verdict.witness
    first = steps[0]
    node = EstimatorState(first["state"], frozenset(first["estimate"]))
    lines = [
        f"violation of {delta}-approximate {verdict.k}-step pre-opacity "
        f"(witness length {len(steps) - 1})"
    ]
    for i, step in enumerate(steps):
        if i > 0:
            node = observer_step(system, delta, node, step["input"], step["state"])
            if sorted(node.q) != list(step["estimate"]):
                raise ModelError(f"witness step {i} does not replay")
        y = ", ".join(f"{c:g}" for c in system.output[node.x])
        arrow = f"-{step['input']}-> " if i > 0 else ""
        inside = node.q <= target
        lines.append(
            f"  [{i}] {arrow}{node.x}  output=({y})  estimate={{{', '.join(sorted(node.q))}}}"
            + (f"  subset of T_{t}" if inside else "")
        )
    lines.append(f"  T_{t} = {{{', '.join(sorted(target))}}}")
    return "\n".join(lines)
