"""delta-approximate current-state estimator.

The estimator pairs the true state ``x`` with the set ``q`` of states an
intruder with measurement precision ``delta`` cannot rule out.  Only the part
reachable from the initial pairs is materialised.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .system import MetricSystem, ModelError, close_states


class EstimatorState(NamedTuple):
    x: str
    q: frozenset

    def sort_key(self):
        return (self.x, tuple(sorted(self.q)))

    def label(self) -> str:
        return f"{self.x} | {{{', '.join(sorted(self.q))}}}"


def _check_delta(delta):
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")


def initial_observer_states(system: MetricSystem, delta: float) -> list[EstimatorState]:
    """Initial estimator pairs, sorted."""
    _check_delta(delta)
    nodes = []
    for x in system.initial:
        q = close_states(system, system.output[x], delta, among=system.initial)
        nodes.append(EstimatorState(x, q))
    return sorted(nodes, key=EstimatorState.sort_key)


def observer_step(
    system: MetricSystem, delta: float, node: EstimatorState, u: str, x_next: str
) -> EstimatorState:
    """Advance ``node`` along the concrete transition ``node.x -u-> x_next``.

    The new estimate is the one-step image of the whole current estimate,
    filtered by output closeness to ``x_next``.
    """
    if (node.x, u, x_next) not in system.transitions:
        raise ModelError(f"no transition ({node.x!r}, {u!r}, {x_next!r})")
    image = system.post_set(node.q)
    return EstimatorState(
        x_next, close_states(system, system.output[x_next], delta, among=image)
    )


@dataclass
class Observer:
    delta: float
    nodes: list[EstimatorState]
    initial_nodes: list[EstimatorState]
    edges: list[tuple[EstimatorState, str, EstimatorState]]
    # BFS tree: node -> (predecessor, input); roots map to None
    parent: dict = field(repr=False, default_factory=dict)
    # number of distinct estimate sets after interning
    distinct_estimates: int = 0

    def __len__(self):
        return len(self.nodes)

    def path_to(self, node: EstimatorState) -> list[tuple[EstimatorState, str | None]]:
        """Shortest observer run reaching ``node`` as ``[(node, input_into_it)]``."""
        steps = []
        cur = node
        while True:
            link = self.parent[cur]
            if link is None:
                steps.append((cur, None))
                break
            prev, u = link
            steps.append((cur, u))
            cur = prev
        return steps[::-1]

    def successors(self, node):
        return [(u, n2) for n1, u, n2 in self.edges if n1 == node]


def build_observer(system: MetricSystem, delta: float) -> Observer:
    """Breadth-first construction of the reachable estimator.

    Expansion order is canonical (sorted nodes, sorted edges) so that node
    order and BFS parents, hence witnesses, are deterministic.
    """
    _check_delta(delta)
    interned: dict[frozenset, frozenset] = {}

    def intern(node: EstimatorState) -> EstimatorState:
        q = interned.setdefault(node.q, node.q)
        return EstimatorState(node.x, q)

    roots = [intern(n) for n in initial_observer_states(system, delta)]
    parent: dict = {n: None for n in roots}
    nodes = list(roots)
    edges = []
    queue = deque(roots)
    while queue:
        node = queue.popleft()
        for u, x_next in system.edges_from(node.x):
            nxt = intern(observer_step(system, delta, node, u, x_next))
            edges.append((node, u, nxt))
            if nxt not in parent:
                parent[nxt] = (node, u)
                nodes.append(nxt)
                queue.append(nxt)
    return Observer(delta, nodes, roots, edges, parent, len(interned))


def _parse_run(system: MetricSystem, run: Sequence[str]):
    if len(run) % 2 == 0:
        raise ModelError("a run alternates states and inputs and ends in a state")
    states = list(run[0::2])
    inputs = list(run[1::2])
    if states[0] not in system.initial:
        raise ModelError(f"run must start in an initial state, got {states[0]!r}")
    for i, u in enumerate(inputs):
        if (states[i], u, states[i + 1]) not in system.transitions:
            raise ModelError(f"invalid step {states[i]!r} -{u}-> {states[i + 1]!r}")
    return states, inputs


def estimate_of_run(system: MetricSystem, delta: float, run: Sequence[str]) -> frozenset:
    """Final states of every run that stays within ``delta`` of ``run``.

    ``run`` alternates states and inputs, e.g. ``["9", "0.05", "2"]``.  The
    candidate runs are enumerated explicitly one by one (no set-level
    merging), which keeps this usable as a check on the estimator.
    """
    _check_delta(delta)
    states, _ = _parse_run(system, run)
    outs = [system.output[x] for x in states]
    n = len(states) - 1
    finals = set()

    def extend(prefix_end: str, depth: int):
        if depth == n:
            finals.add(prefix_end)
            return
        for _, z in system.edges_from(prefix_end):
            if z in close_states(system, outs[depth + 1], delta, among=(z,)):
                extend(z, depth + 1)

    for x0 in sorted(system.initial):
        if close_states(system, outs[0], delta, among=(x0,)):
            extend(x0, 0)
    return frozenset(finals)
