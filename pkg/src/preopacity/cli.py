"""Command-line front end.

Exit codes: 0 property holds / relation found / guarantee obtained,
1 property violated / not related / inconclusive, 2 input or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .abstraction import AbstractionError, QuantizationParams, build_abstraction, load_spec
from .dot import observer_from_dict, observer_to_dict, observer_to_dot, system_to_dot
from .estimator import build_observer
from .indicator import extract_witness, verify_preopacity
from .oracle import BudgetExceeded, OracleQuery, oracle_verify
from .pipeline import GUARANTEED, run_pipeline
from .relation import check_relation, load_relation, max_akp_relation
from .system import dump_system, load_system, system_from_dict, system_to_dict

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _nonneg_float(s):
    v = float(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return v


def cmd_verify(args) -> int:
    system = load_system(args.system).checked()
    if args.method == "oracle":
        horizon = args.horizon or len(build_observer(system, args.delta)) + args.k
        verdict = oracle_verify(system, OracleQuery(args.delta, args.k, max(horizon, 1)))
    else:
        observer = build_observer(system, args.delta)
        verdict = verify_preopacity(system, args.delta, args.k, observer=observer)
        if args.observer_out:
            _emit(observer_to_dict(observer), args.observer_out)
    _emit(verdict.to_dict())
    if not verdict.holds and args.witness:
        with open(args.witness, "w") as fh:
            fh.write(extract_witness(verdict, system, args.delta) + "\n")
    return EXIT_OK if verdict.holds else EXIT_FAIL


def _params(args):
    return QuantizationParams(args.eta, args.mu, args.theta)


def cmd_abstract(args) -> int:
    spec = load_spec(args.spec)
    try:
        system = build_abstraction(spec, _params(args), args.epsilon, args.secret_mode, args.unsafe)
    except AbstractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report_stream = sys.stdout if args.output else sys.stderr
    if args.output:
        dump_system(system, args.output)
    else:
        _emit(system_to_dict(system))
    summary = system.summary()
    print(system.quantization.render(), file=report_stream)
    print(
        f"abstraction: {summary['states']} states, {summary['transitions']} transitions, "
        f"secret states {summary['secret_states']} ({args.secret_mode} mode)",
        file=report_stream,
    )
    for note in system.notes:
        print(f"note: {note}", file=report_stream)
    if system.escaping:
        print(f"warning: image leaves X from {system.escaping}", file=report_stream)
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(system_to_dot(system, "abstraction"))
    return EXIT_OK


def cmd_relate(args) -> int:
    sa = load_system(args.system_a).checked()
    sb = load_system(args.system_b).checked()
    if args.check:
        violations = check_relation(sa, sb, args.epsilon, load_relation(args.check))
        _emit({
            "epsilon": args.epsilon,
            "violations": [
                {"pair": list(p) if isinstance(p, tuple) else p, "condition": c}
                for p, c in violations
            ],
        })
        return EXIT_OK if not violations else EXIT_FAIL
    result = max_akp_relation(sa, sb, args.epsilon)
    _emit(result.to_dict())
    return EXIT_OK if result.related else EXIT_FAIL


def cmd_pipeline(args) -> int:
    spec = load_spec(args.spec)
    try:
        report, _ = run_pipeline(
            spec, _params(args), args.epsilon, args.delta, args.k,
            args.secret_mode, args.unsafe, args.out,
        )
    except AbstractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.json:
        _emit(report.to_dict())
    else:
        print(report.render())
    return EXIT_OK if report.status == GUARANTEED else EXIT_FAIL


def cmd_export(args) -> int:
    if args.format != "dot":
        raise UsageError(f"unknown export format {args.format!r} (supported: dot)")
    with open(args.input) as fh:
        data = json.load(fh)
    if isinstance(data, dict) and {"nodes", "edges", "delta"} <= data.keys():
        text = observer_to_dot(observer_from_dict(data))
    else:
        system = system_from_dict(data).checked()
        if args.observer_delta is not None:
            text = observer_to_dot(build_observer(system, args.observer_delta))
        else:
            text = system_to_dot(system)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _add_quant(p):
    p.add_argument("spec", help="control system JSON")
    p.add_argument("--eta", type=float, required=True, help="state grid pitch")
    p.add_argument("--mu", type=_nonneg_float, required=True, help="input grid pitch (0 for finite U)")
    p.add_argument("--theta", type=float, required=True, help="secret inflation radius")
    p.add_argument("--epsilon", type=float, required=True, help="simulation precision")
    p.add_argument("--secret-mode", choices=("cell", "point"), default="cell")
    p.add_argument("--unsafe", action="store_true", help="build even if the quantization check fails")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="preopacity", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="decide approximate K-step pre-opacity of a finite system")
    p.add_argument("system")
    p.add_argument("--delta", type=_nonneg_float, default=0.0)
    p.add_argument("--k", type=_nonneg_int, default=0)
    p.add_argument("--witness", help="write a readable counterexample trace here")
    p.add_argument("--method", choices=("observer", "oracle"), default="observer")
    p.add_argument("--horizon", type=_nonneg_int, help="oracle run-length bound")
    p.add_argument("--observer-out", help="write the estimator as JSON")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("abstract", help="build a finite abstraction of a control system")
    _add_quant(p)
    p.add_argument("-o", "--output", help="abstraction JSON (default: stdout)")
    p.add_argument("--dot", help="also write a DOT graph")
    p.set_defaults(func=cmd_abstract)

    p = sub.add_parser("relate", help="find or check an epsilon-AKP simulation relation")
    p.add_argument("system_a")
    p.add_argument("system_b")
    p.add_argument("--epsilon", type=_nonneg_float, required=True)
    p.add_argument("--check", help="relation JSON to check instead of searching")
    p.set_defaults(func=cmd_relate)

    p = sub.add_parser("pipeline", help="abstract, verify, and transfer the verdict")
    _add_quant(p)
    p.add_argument("--delta", type=_nonneg_float, default=0.0)
    p.add_argument("--k", type=_nonneg_int, default=0)
    p.add_argument("--out", help="directory for all artifacts")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("export", help="render a system or estimator as DOT")
    p.add_argument("input")
    p.add_argument("--format", default="dot")
    p.add_argument("--observer-delta", type=_nonneg_float,
                   help="export the estimator of the system at this precision")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, TypeError, UsageError, BudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
