"""Command-line front end.

Exit codes: 0 success (all requested properties hold), 1 a property is
violated, 2 usage error, 3 invalid or infeasible scenario.
"""

from __future__ import annotations

import argparse
import sys

from . import runner
from .model import InvalidInstanceError, tolerance
from .posted_price import InvalidRuleError
from .scenarios import ScenarioParseError, builtin, dumps, generate, load_scenario, paper_examples, save_report, save_scenario
from .vcg import InvalidBidError

EXIT_OK, EXIT_VIOLATED, EXIT_USAGE, EXIT_INVALID = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _add_source(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", help="name of a built-in scenario")
    src.add_argument("--scenario", help="path to a scenario JSON file")


def _add_mechanism_options(p):
    p.add_argument("--mechanism", choices=runner.MECHANISMS,
                   help="defaults to the scenario's configured mechanism")
    p.add_argument("--order", help="comma-separated EV ids (posted-price only)")
    p.add_argument("--price-rule", choices=("simple", "day-ahead-vcg", "explicit"),
                   help="posted-price reserve rule")
    p.add_argument("--default-reserve", type=float,
                   help="simple rule: price faced by EVs without a reservation")
    p.add_argument("--variant", help="scenario variant to run")
    p.add_argument("--out", help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evmkt", description="Two-period EV charging market mechanisms.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a mechanism on a scenario")
    _add_source(p)
    _add_mechanism_options(p)

    p = sub.add_parser("check", help="check normative properties of a mechanism on a scenario")
    _add_source(p)
    _add_mechanism_options(p)
    p.add_argument("--properties", help="comma-separated subset of ic,ir,eff,ra,bb,ns,ce")
    p.add_argument("--seed", type=int, default=0, help="seed for random IC deviations")

    p = sub.add_parser("scan", help="check properties over generated instances")
    p.add_argument("--mechanism", choices=runner.MECHANISMS, default="posted-price")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--properties", help="comma-separated property list")
    p.add_argument("--kind", choices=("both", "max_selector", "additive"), default="both")
    p.add_argument("--day-ahead", choices=("vcg", "adversarial", "none"), default="vcg",
                   help="how reservations are drawn; adversarial makes entrants outbid incumbents")
    p.add_argument("--out")

    p = sub.add_parser("paper-examples", help="verify every built-in scenario against its annotations")
    p.add_argument("--out")

    p = sub.add_parser("generate", help="write a generated scenario file")
    p.add_argument("--kind", choices=("max_selector", "additive"), required=True)
    p.add_argument("-T", type=int, required=True)
    p.add_argument("-N", type=int, required=True)
    p.add_argument("--evs", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--day-ahead", choices=("vcg", "adversarial", "none"), default="vcg")
    p.add_argument("--out")

    p = sub.add_parser("list", help="list built-in scenarios")
    return parser


def _emit(report: dict, out: str | None) -> None:
    if out:
        save_report(report, out)
    else:
        sys.stdout.write(dumps({"format_version": 1, **report}))


def _load(args):
    if args.builtin:
        try:
            return builtin(args.builtin)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    return load_scenario(args.scenario)


def _resolved(args, scenario):
    kind = args.mechanism or scenario.mechanism.get("kind")
    if kind is None:
        raise UsageError("no --mechanism given and the scenario configures none")
    config = {"mechanism": kind}
    order = args.order or scenario.mechanism.get("order")
    rule = scenario.mechanism.get("price_rule")
    if args.price_rule:
        rule = {"kind": args.price_rule}
    if args.default_reserve is not None:
        rule = dict(rule or {"kind": "simple"})
        if rule.get("kind") != "simple":
            raise UsageError("--default-reserve applies only to the simple price rule")
        rule["default"] = args.default_reserve
    if kind != "posted-price":
        if args.order or args.price_rule or args.default_reserve is not None:
            raise UsageError("--order, --price-rule and --default-reserve require --mechanism posted-price")
        order, rule = None, None
    else:
        if rule is not None and rule.get("kind") == "explicit" and "prices" not in rule:
            raise UsageError("the explicit price rule needs prices in the scenario's mechanism config")
        if isinstance(order, list):
            order = ",".join(order)
    config.update({"order": order, "price_rule": rule, "variant": args.variant})
    return kind, order, rule, config


def cmd_run(args, tol) -> int:
    scenario = _load(args)
    kind, order, rule, config = _resolved(args, scenario)
    outcome, records = runner.run(scenario, kind, order, rule, args.variant, tol)
    report = {"command": "run", "scenario": scenario.name, "config": {**config, "tolerance": tol},
              **runner.outcome_report(scenario, kind, outcome, records)}
    _emit(report, args.out)
    return EXIT_OK


def _parse_properties(raw):
    if raw is None:
        return None
    return [p for p in (s.strip() for s in raw.split(",")) if p]


def cmd_check(args, tol) -> int:
    scenario = _load(args)
    kind, order, rule, config = _resolved(args, scenario)
    which = _parse_properties(args.properties)
    reports = runner.check(scenario, kind, which, order, rule, args.variant, args.seed, tol)
    report = {"command": "check", "scenario": scenario.name,
              "config": {**config, "properties": which, "seed": args.seed, "tolerance": tol},
              "reports": [r.to_dict() for r in reports]}
    _emit(report, args.out)
    return EXIT_OK if all(r.ok for r in reports) else EXIT_VIOLATED


def cmd_scan(args, tol) -> int:
    which = _parse_properties(args.properties)
    result = runner.scan(args.mechanism, args.trials, args.seed, which, args.kind, args.day_ahead, tol)
    report = {"command": "scan", "config": {"mechanism": args.mechanism, "trials": args.trials,
                                            "seed": args.seed, "properties": which, "kind": args.kind,
                                            "day_ahead": args.day_ahead, "tolerance": tol},
              **result}
    _emit(report, args.out)
    failed = any(c["fail"] for c in result["properties"].values())
    bound = result.get("efficiency_bound")
    if bound and (bound["fail"] or bound["accounting_fail"]):
        failed = True
    return EXIT_VIOLATED if failed else EXIT_OK


def cmd_paper_examples(args, tol) -> int:
    rows = []
    for scenario in paper_examples():
        for label, ok, detail in runner.verify_expectations(scenario, tol):
            rows.append({"check": label, "ok": ok, "detail": detail})
            print(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}", file=sys.stderr)
    _emit({"command": "paper-examples", "results": rows}, args.out)
    return EXIT_OK if all(r["ok"] for r in rows) else EXIT_VIOLATED


def cmd_generate(args, tol) -> int:
    scenario = generate(args.kind, args.T, args.N, args.evs, args.seed, args.day_ahead)
    if args.out:
        save_scenario(scenario, args.out)
    else:
        sys.stdout.write(dumps(scenario.to_json()))
    return EXIT_OK


def cmd_list(args, tol) -> int:
    for s in paper_examples():
        print(f"{s.name}\t{s.mechanism.get('kind', '')}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "check": cmd_check, "scan": cmd_scan, "paper-examples": cmd_paper_examples,
            "generate": cmd_generate, "list": cmd_list}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        tol = tolerance()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, tol)
    except (UsageError, runner.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        if isinstance(exc, (ScenarioParseError, InvalidInstanceError, InvalidBidError, InvalidRuleError)):
            print(f"invalid scenario: {exc}", file=sys.stderr)
            return EXIT_INVALID
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
