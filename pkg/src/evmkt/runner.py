"""Dispatch mechanisms on scenarios, check properties, verify annotations, scan."""

from __future__ import annotations

import numpy as np

from . import properties as props
from .model import DEFAULT_TOLERANCE, EMPTY, DayAheadState, enumerate_bundles
from .posted_price import (
    KEEP,
    DayAheadVcgReserve,
    ExplicitPrices,
    SimpleReserve,
    accounting_holds,
    efficiency_bound_check,
    run_posted_price,
)
from .scenarios import Scenario, generate
from .vcg import constrained_vcg, one_shot_vcg, tp_vcg

MECHANISMS = ("vcg", "tp-vcg", "posted-price", "constrained-eff")

# properties each mechanism is expected to satisfy
DEFAULT_PROPERTIES = {
    "vcg": ("IC", "Eff", "IR", "BB", "NS"),
    "tp-vcg": ("IC", "Eff", "RA"),
    "posted-price": ("IC", "RA", "IR", "BB", "NS"),
    "constrained-eff": ("IC", "CE"),
}


class ConfigError(ValueError):
    pass


def _vcg_sealed(day_ahead, bids, T, N, tol=DEFAULT_TOLERANCE):
    return one_shot_vcg(bids, T, N, tol)


SEALED_BID = {"vcg": _vcg_sealed, "tp-vcg": tp_vcg, "constrained-eff": constrained_vcg}


def check_kind(kind: str) -> str:
    if kind not in MECHANISMS:
        raise ConfigError(f"unknown mechanism {kind!r}; choose from {', '.join(MECHANISMS)}")
    return kind


def resolve_order(scenario: Scenario, order) -> list[int] | None:
    if order is None:
        return None
    ids = scenario.ids
    if isinstance(order, str):
        order = [o.strip() for o in order.split(",") if o.strip()]
    order = [str(o) for o in order]
    if sorted(order) != sorted(ids):
        raise ConfigError(f"order {order} is not a permutation of EV ids {ids}")
    return [ids.index(o) for o in order]


def price_rule(scenario: Scenario, config: dict | None):
    config = dict(config or {"kind": "simple"})
    kind = config.get("kind", "simple")
    if kind == "simple":
        return SimpleReserve(float(config.get("default", 0.0)))
    if kind in ("day_ahead_vcg_vector", "day-ahead-vcg"):
        bids = scenario.day_ahead_bids()
        if bids is None:
            raise ConfigError("day-ahead VCG reserve prices need a day_ahead_bid for every EV")
        return DayAheadVcgReserve(bids, scenario.N)
    if kind == "explicit":
        prices = config.get("prices") or {}
        missing = [i for i in scenario.ids if i not in prices]
        if missing:
            raise ConfigError(f"explicit price rule lacks vectors for EVs {missing}")
        return ExplicitPrices(tuple(tuple(float(a) for a in prices[i]) for i in scenario.ids))
    raise ConfigError(f"unknown price rule {kind!r}")


def effective_day_ahead(scenario: Scenario, kind: str) -> DayAheadState:
    """One-shot VCG has no reservations; every other mechanism inherits them."""
    if kind == "vcg":
        return DayAheadState.empty(len(scenario.evs))
    return scenario.day_ahead_state()


def run(scenario: Scenario, kind: str, order=None, rule_config=None, variant=None, tol=DEFAULT_TOLERANCE):
    """Run one mechanism; returns ``(outcome, query_records_or_None)``."""
    check_kind(kind)
    valuations = scenario.valuations(variant)
    day_ahead = effective_day_ahead(scenario, kind)
    if kind == "posted-price":
        rule = price_rule(scenario, rule_config)
        return run_posted_price(day_ahead, valuations, scenario.T, scenario.N, rule,
                                resolve_order(scenario, order), scenario.ids, tol=tol)
    if rule_config is not None or order is not None:
        raise ConfigError("order and price rule apply only to the posted-price mechanism")
    return SEALED_BID[kind](day_ahead, valuations, scenario.T, scenario.N, tol), None


def check(scenario: Scenario, kind: str, which=None, order=None, rule_config=None, variant=None,
          deviation_seed: int = 0, tol=DEFAULT_TOLERANCE) -> list[props.PropertyReport]:
    check_kind(kind)
    which = DEFAULT_PROPERTIES[kind] if which is None else [props.normalize_property(w) for w in which]
    valuations = scenario.valuations(variant)
    day_ahead = effective_day_ahead(scenario, kind)
    T, N, ids = scenario.T, scenario.N, scenario.ids
    outcome, _ = run(scenario, kind, order, rule_config, variant, tol)
    reports = []
    for prop in which:
        if prop != "IC":
            reports.extend(props.check_outcome_properties(outcome, valuations, day_ahead, T, N, [prop], ids, tol))
            continue
        if kind == "posted-price":
            rule = price_rule(scenario, rule_config)
            o = resolve_order(scenario, order)
            runner = props.posted_price_runner(day_ahead, valuations, T, N, rule, o)
            devs = props.theta_deviations(day_ahead, valuations, T, N, rule, o)
            reports.append(props.check_ic(runner, valuations, devs, exhaustive=True, ids=ids, tol=tol))
        else:
            runner = props.bid_runner(SEALED_BID[kind], valuations, day_ahead, T, N)
            devs = props.default_deviations(valuations, scenario.supports(), deviation_seed)
            reports.append(props.check_ic(runner, valuations, devs, ids=ids, tol=tol))
    return reports


# --- reports -------------------------------------------------------------------

def _slots(x: int, T: int) -> list[int]:
    return list(enumerate_bundles(T)[x].slots)


def outcome_report(scenario: Scenario, kind: str, outcome, records=None) -> dict:
    T = scenario.T
    evs = []
    for k, ev_id in enumerate(scenario.ids):
        evs.append({
            "id": ev_id,
            "bundle": _slots(outcome.allocations[k], T),
            "bundle_index": outcome.allocations[k],
            "day_ahead_payment": outcome.day_ahead_payments[k],
            "real_time_payment": outcome.real_time_payments[k],
            "payment": outcome.payments[k],
            "utility": outcome.utilities[k],
        })
    report = {
        "mechanism": kind,
        "evs": evs,
        "welfare": outcome.welfare,
        "total_payment": outcome.total_payment,
    }
    if records is not None:
        report["queries"] = [
            {
                "ev": r.ev,
                "offered": [_slots(j, T) for j in r.offered],
                "prices": list(r.prices),
                "response": r.response if r.response == KEEP else _slots(r.response, T),
                "real_time_payment": r.payment_delta,
                "welfare_before": r.welfare_before,
                "welfare_after": r.welfare_after,
            }
            for r in records
        ]
    return report


# --- annotated expectations ------------------------------------------------------

def _close(a, b, tol):
    return abs(float(a) - float(b)) <= tol


def verify_expectations(scenario: Scenario, tol: float = DEFAULT_TOLERANCE) -> list[tuple[str, bool, str]]:
    """Re-run every annotated expectation; one ``(label, ok, detail)`` per expectation."""
    results = []
    ids = scenario.ids
    for k, exp in enumerate(scenario.expected):
        label = f"{scenario.name}[{k}]"
        problems = []
        kind = exp.get("mechanism")
        if "check" in exp:
            label += f" {exp['check']}"
            problems = _verify_check(scenario, exp, tol)
        elif "properties" in exp:
            label += f" {kind} properties"
            reports = check(scenario, kind, list(exp["properties"]), tol=tol)
            for r in reports:
                want = exp["properties"][r.property]
                if r.verdict != want and not (want == "holds" and r.verdict == props.SAMPLED):
                    problems.append(f"{r.property}: got {r.verdict}, expected {want}")
        else:
            variant = exp.get("variant")
            label += f" {kind}" + (f" {variant}" if variant else "") + (f" order={exp['order']}" if "order" in exp else "")
            outcome, records = run(scenario, kind, exp.get("order"), None, variant, tol)
            for ev_id, slots in exp.get("allocation", {}).items():
                got = _slots(outcome.allocations[ids.index(ev_id)], scenario.T)
                if got != list(slots):
                    problems.append(f"EV {ev_id} got {got}, expected {slots}")
            for ev_id, p in exp.get("rt_payments", {}).items():
                got = outcome.real_time_payments[ids.index(ev_id)]
                if not _close(got, p, tol):
                    problems.append(f"EV {ev_id} real-time payment {got}, expected {p}")
            if "total_payment" in exp and not _close(outcome.total_payment, exp["total_payment"], tol):
                problems.append(f"total payment {outcome.total_payment}, expected {exp['total_payment']}")
            if "welfare" in exp and not _close(outcome.welfare, exp["welfare"], tol):
                problems.append(f"welfare {outcome.welfare}, expected {exp['welfare']}")
            for ev_id, resp in exp.get("responses", {}).items():
                rec = next(r for r in records if r.ev == ev_id)
                got = rec.response if rec.response == KEEP else _slots(rec.response, scenario.T)
                if got != resp:
                    problems.append(f"EV {ev_id} responded {got}, expected {resp}")
        results.append((label, not problems, "; ".join(problems) or "ok"))
    return results


def _verify_check(scenario: Scenario, exp: dict, tol: float) -> list[str]:
    T, N, ids = scenario.T, scenario.N, scenario.ids
    problems = []
    name = exp["check"]
    if name == "joint_feasibility":
        jf = props.check_joint_feasibility(scenario.valuations(), scenario.day_ahead_state(), T, N, ids, tol)
        if jf.feasible != exp["feasible"]:
            problems.append(f"feasible={jf.feasible}, expected {exp['feasible']}")
        for ev_id, cap in exp.get("payment_caps", {}).items():
            got = max(row[ids.index(ev_id)] for row in jf.payment_caps)
            if not _close(got, cap, tol):
                problems.append(f"EV {ev_id} payment cap {got}, expected {cap}")
    elif name == "ce_payment_infeasibility":
        sysm = props.check_ce_payment_infeasibility(
            scenario.valuations(exp.get("variant_a")), scenario.valuations(exp.get("variant_b")),
            scenario.day_ahead_state(), T, N, ids, tol)
        for key in ("feasible", "pivotal_ev"):
            if key in exp and getattr(sysm, key) != exp[key]:
                problems.append(f"{key}={getattr(sysm, key)}, expected {exp[key]}")
        for key in ("lower", "upper"):
            if key in exp and not _close(getattr(sysm, key), exp[key], tol):
                problems.append(f"{key}={getattr(sysm, key)}, expected {exp[key]}")
    elif name == "efficiency_bound":
        day_ahead = scenario.day_ahead_state()
        valuations = scenario.valuations()
        outcome, _ = run(scenario, "posted-price", tol=tol)
        bc = efficiency_bound_check(outcome, valuations, day_ahead, T, N, tol)
        for key in ("optimum", "gap", "epsilon", "delta"):
            if key in exp and not _close(getattr(bc, key), exp[key], tol):
                problems.append(f"{key}={getattr(bc, key)}, expected {exp[key]}")
        if "holds" in exp and bc.holds != exp["holds"]:
            problems.append(f"holds={bc.holds}, expected {exp['holds']}")
    elif name == "rationalizable":
        supports = scenario.supports()
        if any(s is None for s in supports):
            problems.append("rationalizability needs a support for every EV")
        else:
            da = scenario.day_ahead_state()
            ok, _ = props.rationalizable(da.allocations, da.payments, supports, T, N, tol)
            if ok != exp["rationalizable"]:
                problems.append(f"rationalizable={ok}, expected {exp['rationalizable']}")
    else:
        problems.append(f"unknown check {name!r}")
    return problems


# --- random sweeps -----------------------------------------------------------------

def trial_scenario(seed: int, trial: int, valuation_kind: str = "both", day_ahead: str = "vcg",
                   max_T: int = 4, max_evs: int = 4, max_N: int = 2) -> Scenario:
    """Instance ``trial`` of a scan; dimensions come from ``default_rng([seed, trial])``."""
    rng = np.random.default_rng([seed, trial])
    T = int(rng.integers(1, max_T + 1))
    n = int(rng.integers(1, max_evs + 1))
    N = int(rng.integers(1, max_N + 1))
    sub_seed = int(rng.integers(0, 2**63))
    if valuation_kind == "both":
        valuation_kind = ("max_selector", "additive")[trial % 2]
    return generate(valuation_kind, T, N, n, sub_seed, day_ahead)


def scan(kind: str, trials: int, seed: int, which=None, valuation_kind: str = "both", day_ahead: str = "vcg",
         tol: float = DEFAULT_TOLERANCE) -> dict:
    check_kind(kind)
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    which = list(DEFAULT_PROPERTIES[kind]) if which is None else [props.normalize_property(w) for w in which]
    counts = {p: {"pass": 0, "fail": 0} for p in which}
    bound = {"pass": 0, "fail": 0, "accounting_pass": 0, "accounting_fail": 0}
    failures = []
    for trial in range(trials):
        scenario = trial_scenario(seed, trial, valuation_kind, day_ahead)
        reports = check(scenario, kind, which, deviation_seed=trial, tol=tol)
        for r in reports:
            counts[r.property]["pass" if r.ok else "fail"] += 1
            if not r.ok:
                failures.append({"trial": trial, "scenario": scenario.name, **r.to_dict()})
        if kind == "posted-price":
            outcome, records = run(scenario, kind, tol=tol)
            bc = efficiency_bound_check(outcome, scenario.valuations(), scenario.day_ahead_state(),
                                        scenario.T, scenario.N, tol)
            bound["pass" if bc.holds else "fail"] += 1
            acc = accounting_holds(records, tol)
            bound["accounting_pass" if acc else "accounting_fail"] += 1
    report = {
        "mechanism": kind,
        "trials": trials,
        "seed": seed,
        "valuation_kind": valuation_kind,
        "day_ahead": day_ahead,
        "properties": counts,
        "failures": failures,
    }
    if kind == "posted-price":
        report["efficiency_bound"] = bound
    return report
