"""abstract -> verify -> transfer, end to end."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .abstraction import (
    AbstractSystem,
    ControlSystemSpec,
    QuantizationParams,
    QuantizationReport,
    build_abstraction,
)
from .dot import system_to_dot
from .indicator import Verdict, verify_preopacity
from .relation import transfer_verdict
from .system import dump_system

GUARANTEED = "guaranteed"
INCONCLUSIVE = "inconclusive"

INCONCLUSIVE_NOTE = (
    "the abstraction is not pre-opaque at the requested precision; the transfer "
    "result only runs from abstraction to concrete system, so nothing follows "
    "for the concrete system"
)


@dataclass
class PipelineReport:
    quantization: QuantizationReport
    abstraction: dict
    verdict: Verdict
    epsilon: float
    status: str
    concrete_precision: float | None
    files: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "epsilon": self.epsilon,
            "abstraction_delta": self.verdict.delta,
            "k": self.verdict.k,
            "abstraction_verdict": self.verdict.to_dict(),
            "concrete_precision": self.concrete_precision,
            "quantization": [
                {"name": c.name, "lhs": c.lhs, "rhs": c.rhs, "passed": c.passed}
                for c in self.quantization.checks
            ],
            "abstraction": self.abstraction,
            "files": self.files,
            "notes": self.notes,
        }

    def render(self) -> str:
        a = self.abstraction
        lines = [
            "quantization:",
            *("  " + line for line in self.quantization.render().splitlines()),
            f"abstraction: {a['states']} states, {a['transitions']} transitions, "
            f"secret {a['secret_states']}",
            f"abstraction verdict (delta={self.verdict.delta}, K={self.verdict.k}): "
            + ("pre-opaque" if self.verdict.holds else "violated"),
        ]
        if self.status == GUARANTEED:
            lines.append(
                f"concrete system: {self.concrete_precision:g}-approximate "
                f"{self.verdict.k}-step pre-opaque ({self.status})"
            )
        else:
            lines.append(f"concrete system: {self.status} ({INCONCLUSIVE_NOTE})")
        lines += [f"note: {n}" for n in self.notes]
        lines += [f"wrote {p}" for p in self.files]
        return "\n".join(lines)


def run_pipeline(
    spec: ControlSystemSpec,
    params: QuantizationParams,
    eps: float,
    delta: float,
    k: int,
    secret_mode: str = "cell",
    unsafe: bool = False,
    out_dir: str | None = None,
) -> tuple[PipelineReport, AbstractSystem]:
    system = build_abstraction(spec, params, eps, secret_mode, unsafe=unsafe)
    verdict = verify_preopacity(system, delta, k)
    if verdict.holds:
        status, precision = GUARANTEED, transfer_verdict(delta, eps)
    else:
        status, precision = INCONCLUSIVE, None
    report = PipelineReport(
        system.quantization, system.summary(), verdict, eps, status, precision,
        notes=list(system.notes),
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            "abstraction.json": lambda p: dump_system(system, p),
            "abstraction.dot": lambda p: _write(p, system_to_dot(system, "abstraction")),
            "verdict.json": lambda p: _write(p, _dumps(verdict.to_dict())),
        }
        for name, write in paths.items():
            path = os.path.join(out_dir, name)
            write(path)
            report.files.append(path)
        path = os.path.join(out_dir, "report.json")
        report.files.append(path)
        _write(path, _dumps(report.to_dict()))
    return report, system


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)
