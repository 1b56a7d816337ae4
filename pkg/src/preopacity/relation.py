"""epsilon-approximate pre-opacity preserving (AKP) simulation relations.

Inputs are never matched: a transition ``x -u-> x'`` in one system may be
answered by a transition under any input in the other.  None of the
conditions depend on the step count K, so neither does anything here.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .system import MetricSystem, ModelError, output_distance, validate_system, within

Pair = tuple[str, str]

COND_INIT_A = "1a"
COND_INIT_B = "1b"
COND_OUTPUT = "2"
COND_FORWARD = "3a"
COND_BACKWARD = "3b"
COND_PUBLIC = "3c"


@dataclass(frozen=True)
class RelationPairs:
    pairs: frozenset
    epsilon: float

    def __len__(self):
        return len(self.pairs)

    def __contains__(self, pair):
        return tuple(pair) in self.pairs

    def sorted(self) -> list[Pair]:
        return sorted(self.pairs)


@dataclass
class AkpResult:
    related: bool
    relation: RelationPairs | None = None
    failure_reason: str | None = None
    # initial states left unmatched, reported with failure_reason
    unmatched: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {"related": self.related}
        if self.relation is not None:
            d["epsilon"] = self.relation.epsilon
            d["relation"] = relation_to_json(self.relation)
        if self.failure_reason:
            d["failure_reason"] = self.failure_reason
            d["unmatched"] = self.unmatched
        return d


def _check_dims(sa: MetricSystem, sb: MetricSystem):
    da, db = sa.output_dim, sb.output_dim
    if da != db or da < 0:
        raise ModelError(f"output dimensions differ: {da} vs {db}")


def candidate_relation(sa: MetricSystem, sb: MetricSystem, epsilon: float) -> RelationPairs:
    """All state pairs whose outputs are within ``epsilon``."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    _check_dims(sa, sb)
    pairs = frozenset(
        (a, b)
        for a in sa.states
        for b in sb.states
        if within(output_distance(sa.output[a], sb.output[b]), epsilon)
    )
    return RelationPairs(pairs, epsilon)


def _pair_violations(sa, sb, a, b, rel) -> list[str]:
    """Which of 3a/3b/3c fail for the pair ``(a, b)`` against ``rel``."""
    post_a, post_b = sa.post(a), sb.post(b)
    bad = []
    if any(not any((a2, b2) in rel for b2 in post_b) for a2 in post_a):
        bad.append(COND_FORWARD)
    if any(not any((a2, b2) in rel for a2 in post_a) for b2 in post_b):
        bad.append(COND_BACKWARD)
    public_a = [a2 for a2 in post_a if a2 not in sa.secret]
    if any(
        not any((a2, b2) in rel for a2 in public_a)
        for b2 in post_b
        if b2 not in sb.secret
    ):
        bad.append(COND_PUBLIC)
    return bad


def _initial_failures(sa, sb, rel):
    left = sorted(a for a in sa.initial if not any((a, b) in rel for b in sb.initial))
    right = sorted(b for b in sb.initial if not any((a, b) in rel for a in sa.initial))
    return left, right


def greatest_fixpoint(sa: MetricSystem, sb: MetricSystem, epsilon: float) -> frozenset:
    """Largest relation satisfying conditions 2 and 3a-3c.

    Worklist refinement: a pair is deleted as soon as it breaks a transfer
    condition, and only predecessors of a deleted pair are re-examined.
    """
    rel = set(candidate_relation(sa, sb, epsilon).pairs)
    pred_a = {x: set() for x in sa.states}
    pred_b = {x: set() for x in sb.states}
    for x, _, x2 in sa.transitions:
        pred_a[x2].add(x)
    for x, _, x2 in sb.transitions:
        pred_b[x2].add(x)

    queue = deque(sorted(rel))
    queued = set(rel)
    while queue:
        pair = queue.popleft()
        queued.discard(pair)
        if pair not in rel:
            continue
        if _pair_violations(sa, sb, pair[0], pair[1], rel):
            rel.discard(pair)
            for pa in pred_a[pair[0]]:
                for pb in pred_b[pair[1]]:
                    p = (pa, pb)
                    if p in rel and p not in queued:
                        queued.add(p)
                        queue.append(p)
    return frozenset(rel)


def max_akp_relation(sa: MetricSystem, sb: MetricSystem, epsilon: float) -> AkpResult:
    """Decide ``sa`` is epsilon-AKP simulated by ``sb``.

    The transfer conditions are preserved under unions, so the greatest
    fixpoint is the unique maximal candidate; the initial-state conditions
    hold for some AKP relation iff they hold for it.
    """
    for s in (sa, sb):
        errs = validate_system(s).errors
        if errs:
            raise ModelError("; ".join(errs))
    rel = greatest_fixpoint(sa, sb, epsilon)
    left, right = _initial_failures(sa, sb, rel)
    if left:
        return AkpResult(False, None, COND_INIT_A, left)
    if right:
        return AkpResult(False, None, COND_INIT_B, right)
    return AkpResult(True, RelationPairs(rel, epsilon))


def check_relation(
    sa: MetricSystem, sb: MetricSystem, epsilon: float, relation: Iterable[Pair] | RelationPairs
) -> list[tuple[Pair | str, str]]:
    """Every ``(pair, condition)`` violation of a supplied relation.

    Initial-state failures are reported against the unmatched state id.  An
    empty list means the relation is an epsilon-AKP relation.
    """
    if isinstance(relation, RelationPairs):
        relation = relation.pairs
    rel = frozenset(tuple(p) for p in relation)
    sa.require_states(a for a, _ in rel)
    sb.require_states(b for _, b in rel)
    _check_dims(sa, sb)
    out: list[tuple[Pair | str, str]] = []
    left, right = _initial_failures(sa, sb, rel)
    out += [(a, COND_INIT_A) for a in left]
    out += [(b, COND_INIT_B) for b in right]
    for a, b in sorted(rel):
        if not within(output_distance(sa.output[a], sb.output[b]), epsilon):
            out.append(((a, b), COND_OUTPUT))
        out += [((a, b), c) for c in _pair_violations(sa, sb, a, b, rel)]
    return out


def transfer_verdict(delta_b: float, epsilon: float) -> float:
    """Precision guaranteed for the simulated system: ``delta_b + 2*epsilon``."""
    if delta_b < 0 or epsilon < 0:
        raise ValueError("delta and epsilon must be non-negative")
    return delta_b + 2 * epsilon


def relation_to_json(relation: RelationPairs | Iterable[Pair]) -> list[dict]:
    pairs = relation.pairs if isinstance(relation, RelationPairs) else relation
    return [{"a": a, "b": b} for a, b in sorted(pairs)]


def load_relation(path) -> list[Pair]:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ModelError("relation file must be a JSON array of {a, b} objects")
    pairs = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or set(item) != {"a", "b"}:
            raise ModelError(f"relation[{i}]: expected an object with fields a, b")
        pairs.append((str(item["a"]), str(item["b"])))
    return pairs
