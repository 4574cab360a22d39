"""Command-line front end.

Exit codes: 0 when every check holds, the run completed with SUCCESS, or the
evaluated request was permitted; 1 when a property is violated, a run
deadlocks or ends in error, or a request is not permitted; 2 for usage,
parse and lookup errors. Reports go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from coalcheck import coalition as cc
from coalcheck.checker import (
    StateLimitExceeded,
    check_liveness,
    check_safety,
    reachable,
)
from coalcheck.dsl import ParseError, parse_scenario
from coalcheck.engine import run, validate_workflow
from coalcheck.policy import Action
from coalcheck.scenario import Scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _UsageError(Exception):
    pass


def _emit(lines: Sequence[str]) -> None:
    for line in lines:
        print(line)


def _load(path: str) -> Scenario:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise _UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return parse_scenario(data)
    except ParseError as exc:
        raise _UsageError("\n".join(f"{path}:{d}" for d in exc.diagnostics)) from None


def _check_variant(s: Scenario, name: Optional[str]) -> Optional[str]:
    if name is not None and name not in {v.name for v in s.variants}:
        raise _UsageError(f"no such variant: {name}")
    return name


def _validated(s: Scenario, variant: Optional[str] = None):
    reg = s.registry(variant)
    report = validate_workflow(s.workflow, reg)
    for issue in report.issues:
        print(issue, file=sys.stderr)
    if not report.ok:
        raise _UsageError("workflow is not well-formed")
    return reg


def cmd_run(args) -> int:
    s = _load(args.scenario)
    variant = _check_variant(s, args.variant)
    reg = _validated(s, variant)
    max_steps = args.max_steps or s.settings.max_steps
    trace = run(s.workflow, s.initial_state(variant), reg, max_steps)
    _emit(trace.lines(args.format))
    return EXIT_OK if trace.outcome == "COMPLETED(SUCCESS)" else EXIT_FAIL


def cmd_check(args) -> int:
    s = _load(args.scenario)
    names = args.safety or []
    if not args.liveness and not names:
        args.liveness = True
        names = ["all"]
    props = []
    for name in names:
        if name == "all":
            props.extend(s.properties)
            continue
        try:
            props.append(s.property(name))
        except KeyError:
            raise _UsageError(f"no such property: {name}") from None
    variants = []
    for name in args.variant or []:
        if name == "all":
            variants.extend(s.policy_variants())
        else:
            variants.append(s.policy_variant(_check_variant(s, name)))
    reg = _validated(s)
    for v in variants:
        _validated(s, v.name)
    try:
        space = reachable(
            s.workflow,
            s.initial_state(),
            reg,
            variants,
            max_steps=args.max_steps or s.settings.max_steps,
            state_cap=args.state_cap or s.settings.state_cap,
            workers=args.workers,
        )
    except StateLimitExceeded as exc:
        if args.format == "json-lines":
            print(json.dumps({"check": "EXPLORATION", "verdict": "STATE_LIMIT_EXCEEDED"}))
        else:
            print(f"EXPLORATION: STATE_LIMIT_EXCEEDED ({exc})")
        return EXIT_FAIL
    reports = []
    if args.liveness:
        reports.append(check_liveness(space))
    seen = set()
    for prop in props:
        if prop.name not in seen:
            seen.add(prop.name)
            reports.append(check_safety(prop.formula, space, prop.name))
    for k, report in enumerate(reports):
        if k and args.format == "plain":
            print()
        _emit(report.lines(s.workflow, args.format))
    return EXIT_OK if all(r.holds for r in reports) else EXIT_FAIL


def cmd_eval(args) -> int:
    s = _load(args.scenario)
    variant = _check_variant(s, args.variant)
    state = s.initial_state(variant)
    items = frozenset(x.strip() for x in args.info.split(",") if x.strip())
    if not items:
        raise _UsageError("--info needs at least one information item")
    try:
        effect = cc.request_info(state, args.agent, args.coalition, Action(args.action), items)
    except cc.CoalitionError as exc:
        raise _UsageError(f"{type(exc).__name__}: {exc}") from None
    if args.format == "json-lines":
        print(json.dumps({"effect": effect.value}))
    else:
        print(f"EFFECT: {effect.value}")
    return EXIT_OK if effect.value == "PERMIT" else EXIT_FAIL


def cmd_validate(args) -> int:
    s = _load(args.scenario)
    report = validate_workflow(s.workflow, s.registry())
    if args.format == "json-lines":
        for i in report.issues:
            print(json.dumps({"severity": i.severity.value, "code": i.code, "node": i.node, "message": i.message}))
    else:
        _emit([str(i) for i in report.issues])
        print(f"VALID: {'yes' if report.ok else 'no'} ({len(report.errors)} errors, {len(report.warnings)} warnings)")
    return EXIT_OK if report.ok else EXIT_FAIL


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--max-steps", type=_positive, default=None)
    common.add_argument("--state-cap", type=_positive, default=None)
    common.add_argument("--workers", type=_positive, default=1)
    common.add_argument("--format", choices=("plain", "json-lines"), default="plain")

    parser = argparse.ArgumentParser(
        prog="coalcheck", description="Run and verify dynamic-coalition workflow scenarios."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="execute the workflow and print its trace")
    p.add_argument("scenario")
    p.add_argument("--variant", help="run with a declared policy variant")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", parents=[common], help="check liveness and safety properties")
    p.add_argument("scenario")
    p.add_argument("--liveness", action="store_true", help="check deadlock freedom")
    p.add_argument("--safety", action="append", metavar="NAME|all", help="check a forbidden-state property")
    p.add_argument("--variant", action="append", metavar="NAME|all", help="also explore a policy variant")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("eval", parents=[common], help="ask a coalition PDP for a decision")
    p.add_argument("scenario")
    p.add_argument("--agent", required=True)
    p.add_argument("--coalition", required=True)
    p.add_argument("--action", required=True, choices=("READ", "WRITE"))
    p.add_argument("--info", required=True, help="comma-separated information items")
    p.add_argument("--variant")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("validate", parents=[common], help="report workflow structure problems")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
