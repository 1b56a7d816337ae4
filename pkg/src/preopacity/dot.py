"""Deterministic Graphviz export for systems and estimators."""

from __future__ import annotations

from .estimator import Observer
from .system import MetricSystem


def _q(s: str) -> str:
    return '"{}"'.format(str(s).replace("\\", "\\\\").replace('"', r"\""))


def _num_key(s: str):
    try:
        return (0, tuple(float(p) for p in s.split(",")), s)
    except ValueError:
        return (1, (), s)


def system_to_dot(system: MetricSystem, name: str = "system") -> str:
    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;"]
    for x in sorted(system.states, key=_num_key):
        y = ", ".join(f"{c:.3g}" for c in system.output[x])
        attrs = [f"label={_q(f'{x} [{y}]')}"]
        if x in system.initial:
            attrs.append("peripheries=2")
        if x in system.secret:
            attrs.append('style=filled fillcolor="#f4cccc" color=red')
        lines.append(f"  {_q(x)} [{' '.join(attrs)}];")
    for x, u, x2 in sorted(system.transitions, key=lambda t: (_num_key(t[0]), t[1], _num_key(t[2]))):
        lines.append(f"  {_q(x)} -> {_q(x2)} [label={_q(u)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def observer_to_dot(observer: Observer, name: str = "observer") -> str:
    order = sorted(observer.nodes, key=lambda n: n.sort_key())
    ident = {n: f"n{i}" for i, n in enumerate(order)}
    initial = set(observer.initial_nodes)
    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;"]
    for n in order:
        shape = "doublecircle" if n in initial else "ellipse"
        lines.append(f"  {ident[n]} [label={_q(n.label())} shape={shape}];")
    edges = sorted((ident[a], u, ident[b]) for a, u, b in observer.edges)
    for a, u, b in edges:
        lines.append(f"  {a} -> {b} [label={_q(u)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def observer_to_dict(observer: Observer) -> dict:
    order = sorted(observer.nodes, key=lambda n: n.sort_key())
    ident = {n: i for i, n in enumerate(order)}
    initial = set(observer.initial_nodes)
    return {
        "delta": observer.delta,
        "nodes": [
            {"id": ident[n], "state": n.x, "estimate": sorted(n.q), "initial": n in initial}
            for n in order
        ],
        "edges": [
            {"from": a, "input": u, "to": b}
            for a, u, b in sorted((ident[a], u, ident[b]) for a, u, b in observer.edges)
        ],
    }


def observer_from_dict(data) -> Observer:
    from .estimator import EstimatorState

    nodes = {}
    for item in data["nodes"]:
        nodes[item["id"]] = EstimatorState(str(item["state"]), frozenset(map(str, item["estimate"])))
    initial = [nodes[i["id"]] for i in data["nodes"] if i["initial"]]
    edges = [(nodes[e["from"]], str(e["input"]), nodes[e["to"]]) for e in data["edges"]]
    return Observer(float(data["delta"]), list(nodes.values()), initial, edges)
