"""Seeded random finite systems for cross-checks."""

import random

from preopacity.system import MetricSystem

OUTPUT_GRID = (0.0, 0.5, 1.0, 1.5)


def random_system(rng, max_states=6, max_inputs=2, nonblocking=False, outputs=OUTPUT_GRID):
    n = rng.randint(1, max_states)
    states = [f"s{i}" for i in range(n)]
    inputs = [f"u{j}" for j in range(rng.randint(1, max_inputs))]
    transitions = set()
    for x in states:
        if not nonblocking and rng.random() < 0.15:
            continue  # deadlock
        for u in inputs:
            for x2 in rng.sample(states, rng.choice((0, 1, 1, 2)) if n > 1 else rng.randint(0, 1)):
                transitions.add((x, u, x2))
        if nonblocking and not any(t[0] == x for t in transitions):
            transitions.add((x, rng.choice(inputs), rng.choice(states)))
    initial = [x for x in states if rng.random() < 0.5] or [rng.choice(states)]
    secret = [x for x in states if rng.random() < 0.4]
    output = {x: [rng.choice(outputs)] for x in states}
    return MetricSystem(states, initial, secret, inputs, transitions, output)


def corpus(count=240, seed=20240601, **kw):
    """Half blocking-allowed, half non-blocking systems."""
    rng = random.Random(seed)
    return [random_system(rng, nonblocking=bool(i % 2), **kw) for i in range(count)]


def perturbed_copy(rng, sb: MetricSystem, eps: float):
    """A system related to ``sb`` by construction: every state is split into
    one or two copies with outputs moved by at most ``eps``; some secret
    copies are declassified (that only helps the public-successor clause)."""
    copies = {x: [f"{x}#{i}" for i in range(rng.randint(1, 2))] for x in sb.states}
    states = [c for x in sb.states for c in copies[x]]
    output = {}
    for x in sb.states:
        for c in copies[x]:
            shift = rng.choice((-1, -0.5, 0, 0.5, 1)) * eps
            output[c] = [v + shift for v in sb.output[x]]
    transitions = set()
    for x, u, y in sb.transitions:
        for c in copies[x]:
            targets = rng.sample(copies[y], rng.randint(1, len(copies[y])))
            for t in targets:
                transitions.add((c, rng.choice(sb.inputs), t))
    initial = [c for x in sb.initial for c in copies[x]]
    secret = [c for x in sb.secret for c in copies[x] if rng.random() < 0.8]
    return MetricSystem(states, initial, secret, sb.inputs, transitions, output)
