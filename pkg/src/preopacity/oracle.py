"""Bounded brute-force pre-opacity check straight from the definition.

Used to cross-check :func:`preopacity.indicator.verify_preopacity`.  It does
not touch the estimator or the backward indicator sets: the consistent set of
each run is recomputed from pairwise output closeness, and "every
``t``-step continuation is secret" is decided with forward images.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .indicator import Verdict
from .system import MetricSystem, ModelError, output_distance, validate_system, within

DEFAULT_NODE_BUDGET = 2_000_000
BUDGET_ENV = "PREOPACITY_ORACLE_BUDGET"


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleQuery:
    delta: float
    k: int
    horizon: int

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")


def _budget(node_budget):
    if node_budget is not None:
        return node_budget
    return int(os.environ.get(BUDGET_ENV, DEFAULT_NODE_BUDGET))


def _predecessors(system: MetricSystem):
    pred = {x: set() for x in system.states}
    for x, _, x2 in system.transitions:
        pred[x2].add(x)
    return pred


def revealing_horizon(system: MetricSystem, consistent: frozenset, k: int):
    """Smallest ``t >= k`` such that every ``t``-step continuation of every
    state in ``consistent`` ends in a secret state, else ``None``.

    The forward images ``Post^t`` form an eventually periodic sequence, so the
    search stops once an image repeats.
    """
    secret = system.secret
    cur = frozenset(consistent)
    for _ in range(k):
        cur = system.post_set(cur)
    seen = set()
    t = k
    while cur not in seen:
        if cur <= secret:
            return t
        seen.add(cur)
        cur = system.post_set(cur)
        t += 1
    return None


def oracle_verify(system: MetricSystem, query: OracleQuery, node_budget: int | None = None) -> Verdict:
    """Check every run of length ``<= query.horizon`` against the definition.

    Runs whose last state and consistent set coincide have the same future,
    so a run is only extended the first time its ``(state, consistent set)``
    pair shows up.  ``node_budget`` caps the number of run prefixes examined
    (default from ``$PREOPACITY_ORACLE_BUDGET``).
    """
    report = validate_system(system)
    if report.errors:
        raise ModelError("; ".join(report.errors))
    budget = _budget(node_budget)
    delta, k = query.delta, query.k
    pred = _predecessors(system)
    horizon_cache: dict[frozenset, int | None] = {}

    def close(y, z):
        return within(output_distance(y, system.output[z]), delta)

    def verdict_for(run, consistent):
        if consistent not in horizon_cache:
            horizon_cache[consistent] = revealing_horizon(system, consistent, k)
        return horizon_cache[consistent]

    # layer entries: (run as [x0, u1, x1, ...], consistent set of final states)
    layer = []
    for x0 in sorted(system.initial):
        y0 = system.output[x0]
        layer.append(([x0], frozenset(z for z in system.initial if close(y0, z))))
    seen = set()
    examined = 0
    for _depth in range(query.horizon + 1):
        nxt = []
        for run, consistent in layer:
            key = (run[-1], consistent)
            if key in seen:
                continue
            seen.add(key)
            examined += 1
            if examined > budget:
                raise BudgetExceeded(
                    f"oracle examined more than {budget} run prefixes; "
                    f"raise ${BUDGET_ENV} or lower the horizon"
                )
            t = verdict_for(run, consistent)
            if t is not None:
                witness = []
                cons_trace = _consistent_trace(system, run, delta, pred)
                for i in range(0, len(run), 2):
                    step = {"state": run[i]}
                    if i:
                        step["input"] = run[i - 1]
                    step["estimate"] = sorted(cons_trace[i // 2])
                    witness.append(step)
                return Verdict(False, delta, k, witness, len(seen), t,
                               report.deadlocks, method="oracle")
            x = run[-1]
            for u, x2 in system.edges_from(x):
                y2 = system.output[x2]
                # states close to x2 with a predecessor that was consistent
                cons2 = frozenset(
                    z for z in system.states if close(y2, z) and pred[z] & consistent
                )
                nxt.append((run + [u, x2], cons2))
        layer = nxt
        if not layer:
            break
    return Verdict(True, delta, k, None, len(seen), None, report.deadlocks, method="oracle")


def _consistent_trace(system, run, delta, pred):
    states = run[0::2]
    out = []
    cons = frozenset(
        z for z in system.initial
        if within(output_distance(system.output[states[0]], system.output[z]), delta)
    )
    out.append(cons)
    for x in states[1:]:
        cons = frozenset(
            z for z in system.states
            if within(output_distance(system.output[x], system.output[z]), delta)
            and pred[z] & cons
        )
        out.append(cons)
    return out
