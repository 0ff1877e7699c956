"""Verdicts for the normative properties of a two-period market outcome.

Outcome properties (IR, Eff, RA, BB, NS, CE) are decided exactly from one
outcome. Incentive compatibility quantifies over every possible report,
so it is checked against a finite deviation set: a pass over a sampled set
is reported as ``holds_on_sampled_deviations``, and only an exhausted
report space (the posted-price choice set) earns an unconditional
``holds``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .model import DEFAULT_TOLERANCE, DayAheadState, MechanismOutcome, enumerate_bundles, is_feasible, utility, welfare
from .posted_price import KEEP, run_posted_price
from .solver import SolveSpec, all_optimal_profiles, constrained_max_welfare, max_welfare

HOLDS = "holds"
VIOLATED = "violated"
SAMPLED = "holds_on_sampled_deviations"
NOT_APPLICABLE = "not_applicable"

OUTCOME_PROPERTIES = ("IR", "Eff", "RA", "BB", "NS", "CE")
ALL_PROPERTIES = ("IC",) + OUTCOME_PROPERTIES
SCALES = (0.0, 0.5, 0.9, 1.1, 2.0)
N_RANDOM_DEVIATIONS = 20


@dataclass
class PropertyReport:
    property: str
    verdict: str
    witness: dict | None = None
    evidence: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.verdict in (HOLDS, SAMPLED)

    def to_dict(self) -> dict:
        return {"property": self.property, "verdict": self.verdict,
                "witness": self.witness, "evidence": self.evidence}


def normalize_property(name: str) -> str:
    lookup = {p.lower(): p for p in ALL_PROPERTIES}
    try:
        return lookup[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown property {name!r}; choose from {', '.join(ALL_PROPERTIES)}") from None


def _per_ev(prop, values, bounds, ids, tol, label, bound_label):
    """Shared shape of the per-EV inequalities ``values[i] >= bounds[i]``."""
    worst = None
    for k, (a, b) in enumerate(zip(values, bounds)):
        if a < b - tol and (worst is None or a - b < worst[1] - worst[2]):
            worst = (k, a, b)
    evidence = {label: list(values), bound_label: list(bounds)}
    if worst is None:
        return PropertyReport(prop, HOLDS, None, evidence)
    k, a, b = worst
    return PropertyReport(prop, VIOLATED, {"ev": ids[k], label: a, bound_label: b}, evidence)


def check_outcome_properties(
    outcome: MechanismOutcome,
    valuations,
    day_ahead: DayAheadState,
    T: int,
    N: int,
    which: Iterable[str] = ("IR", "Eff", "RA", "BB", "NS"),
    ids: Sequence[str] | None = None,
    tol: float = DEFAULT_TOLERANCE,
) -> list[PropertyReport]:
    n = len(valuations)
    ids = [str(k + 1) for k in range(n)] if ids is None else list(ids)
    utils = [utility(v, x, p) for v, x, p in zip(valuations, outcome.allocations, outcome.payments)]
    reports = []
    for prop in which:
        prop = normalize_property(prop)
        if prop == "IR":
            reports.append(_per_ev("IR", utils, [0.0] * n, ids, tol, "utility", "floor"))
        elif prop == "RA":
            reports.append(_per_ev("RA", utils, list(day_ahead.guarantee(valuations)), ids, tol,
                                   "utility", "guarantee"))
        elif prop == "NS":
            reports.append(_per_ev("NS", list(outcome.payments), [0.0] * n, ids, tol, "payment", "floor"))
        elif prop == "BB":
            total = sum(outcome.payments)
            ev = {"payment_total": total, "payments": list(outcome.payments)}
            if total < -tol:
                reports.append(PropertyReport("BB", VIOLATED, {"payment_total": total}, ev))
            else:
                reports.append(PropertyReport("BB", HOLDS, None, ev))
        elif prop == "Eff":
            achieved = welfare(valuations, outcome.allocations)
            optimum = max_welfare(SolveSpec.make(valuations, (N,) * T), tol).welfare
            ev = {"welfare": achieved, "optimum": optimum}
            if achieved < optimum - tol:
                reports.append(PropertyReport("Eff", VIOLATED, dict(ev), ev))
            else:
                reports.append(PropertyReport("Eff", HOLDS, None, ev))
        elif prop == "CE":
            reports.append(_check_ce(outcome, valuations, day_ahead, T, N, ids, tol))
        else:
            raise ValueError("IC needs a mechanism to re-run; use check_ic")
    return reports


def _check_ce(outcome, valuations, day_ahead, T, N, ids, tol) -> PropertyReport:
    guarantees = day_ahead.guarantee(valuations)
    values = [v[x - 1] for v, x in zip(valuations, outcome.allocations)]
    per_ev = _per_ev("CE", values, list(guarantees), ids, tol, "bundle_value", "guarantee")
    if per_ev.verdict == VIOLATED:
        return per_ev
    achieved = sum(values)
    optimum = constrained_max_welfare(valuations, day_ahead, (N,) * T, tol).welfare
    evidence = {"welfare": achieved, "constrained_optimum": optimum}
    if achieved < optimum - tol:
        return PropertyReport("CE", VIOLATED, dict(evidence), evidence)
    return PropertyReport("CE", HOLDS, None, evidence)


def replay_witness(report: PropertyReport, tol: float = DEFAULT_TOLERANCE) -> bool:
    """True when the witness alone still demonstrates the violation."""
    w = report.witness
    if report.verdict != VIOLATED or w is None:
        return False
    prop = report.property
    if prop in ("IR", "RA"):
        return w["utility"] < w["floor" if prop == "IR" else "guarantee"] - tol
    if prop == "NS":
        return w["payment"] < w["floor"] - tol
    if prop == "BB":
        return w["payment_total"] < -tol
    if prop == "Eff":
        return w["welfare"] < w["optimum"] - tol
    if prop == "CE":
        if "bundle_value" in w:
            return w["bundle_value"] < w["guarantee"] - tol
        return w["welfare"] < w["constrained_optimum"] - tol
    if prop == "IC":
        return w["deviated_utility"] > w["truthful_utility"] + tol
    raise ValueError(prop)


# --- incentive compatibility -------------------------------------------------

Runner = Callable[[int, object], MechanismOutcome]


def check_ic(
    run: Runner,
    valuations,
    deviations: Mapping[int, Sequence[object]],
    exhaustive: bool = False,
    ids: Sequence[str] | None = None,
    tol: float = DEFAULT_TOLERANCE,
) -> PropertyReport:
    """Search for a profitable unilateral deviation.

    ``run(i, report)`` re-runs the mechanism with EV i's report replaced
    (``None`` means truthful). Utilities are always valued at the true
    ``valuations``. The first strict gain found, in EV-then-deviation
    order, becomes the witness.
    """
    n = len(valuations)
    ids = [str(k + 1) for k in range(n)] if ids is None else list(ids)
    truthful = run(None, None)
    tried = 0
    for i in range(n):
        base = utility(valuations[i], truthful.allocations[i], truthful.payments[i])
        for report in deviations.get(i, ()):
            tried += 1
            out = run(i, report)
            u = utility(valuations[i], out.allocations[i], out.payments[i])
            if u > base + tol:
                witness = {
                    "ev": ids[i],
                    "deviation": _jsonable(report),
                    "truthful_utility": base,
                    "deviated_utility": u,
                    "gain": u - base,
                }
                return PropertyReport("IC", VIOLATED, witness, {"deviations_tried": tried})
    return PropertyReport("IC", HOLDS if exhaustive else SAMPLED, None, {"deviations_tried": tried})


def replay_ic_witness(run: Runner, valuations, ids: Sequence[str], witness: dict, tol: float = DEFAULT_TOLERANCE) -> bool:
    i = list(ids).index(witness["ev"])
    report = witness["deviation"]
    if isinstance(report, list):
        report = tuple(report)
    base = run(None, None)
    out = run(i, report)
    gain = (utility(valuations[i], out.allocations[i], out.payments[i])
            - utility(valuations[i], base.allocations[i], base.payments[i]))
    return gain > tol


def _jsonable(report):
    if isinstance(report, tuple):
        return list(report)
    return report


def bid_runner(mechanism: Callable, bids, day_ahead: DayAheadState, T: int, N: int) -> Runner:
    """Runner for sealed-bid mechanisms ``mechanism(day_ahead, bids, T, N)``."""
    bids = [tuple(b) for b in bids]

    def run(i, report):
        profile = list(bids)
        if i is not None:
            profile[i] = tuple(report)
        return mechanism(day_ahead, profile, T, N)

    return run


def posted_price_runner(day_ahead, valuations, T, N, rule=None, order=None) -> Runner:
    def run(i, report):
        overrides = None if i is None else {i: report}
        return run_posted_price(day_ahead, valuations, T, N, rule, order, overrides=overrides)[0]

    return run


def theta_deviations(day_ahead, valuations, T, N, rule=None, order=None) -> dict[int, list]:
    """Every admissible response of every EV given truthful predecessors.

    An EV's offered set and prices depend only on earlier responses, so the
    truthful run's query records enumerate the full choice set.
    """
    _, records = run_posted_price(day_ahead, valuations, T, N, rule, order)
    n = len(valuations)
    order = list(range(n)) if order is None else list(order)
    return {i: [KEEP, *rec.offered] for i, rec in zip(order, records)}


def default_deviations(valuations, supports=None, seed: int = 0) -> dict[int, list[tuple[float, ...]]]:
    """Truthful report, support elements, scalings, and seeded random perturbations.

    Random perturbation k of EV i draws, per non-empty bundle j,
    ``b_j = v_j * u1 + spread * u2`` with ``u1 ~ U[0, 2]``, ``u2 ~ U[0, 1]`` and
    ``spread`` the EV's largest value (1 if all zero), from
    ``numpy.random.default_rng([seed, i])``.
    """
    out = {}
    for i, v in enumerate(valuations):
        v = tuple(float(a) for a in v)
        devs = [v]
        for s in (supports[i] if supports and supports[i] else ()):
            devs.append(tuple(float(a) for a in s))
        for c in SCALES:
            devs.append(tuple(a * c for a in v))
        rng = np.random.default_rng([seed, i])
        spread = max(v) if max(v) > 0 else 1.0
        for _ in range(N_RANDOM_DEVIATIONS):
            u1 = rng.uniform(0.0, 2.0, size=len(v))
            u2 = rng.uniform(0.0, 1.0, size=len(v))
            dev = (0.0,) + tuple(float(v[j] * u1[j] + spread * u2[j]) for j in range(1, len(v)))
            devs.append(dev)
        unique = list(dict.fromkeys(devs))
        out[i] = unique
    return out


# --- rationalizability and impossibility witnesses ----------------------------

def rationalizable(profile, payments, supports, T: int, N: int, tol: float = DEFAULT_TOLERANCE):
    """Search the product support for a profile making ``profile`` optimal.

    Returns ``(True, witness_valuations)`` or ``(False, None)``.
    """
    capacity = (N,) * T
    if not is_feasible(profile, enumerate_bundles(T), N):
        return False, None
    for choice in itertools.product(*supports):
        if any(not (-tol <= p <= v[x - 1] + tol) for v, x, p in zip(choice, profile, payments)):
            continue
        best = max_welfare(SolveSpec.make(choice, capacity), tol).welfare
        if welfare(choice, profile) >= best - tol:
            return True, [list(v) for v in choice]
    return False, None


@dataclass
class JointFeasibility:
    """Payment caps that reservation awareness imposes at each efficient allocation."""

    efficient_profiles: list[tuple[int, ...]]
    payment_caps: list[list[float]]
    feasible: bool
    binding_ev: str | None

    def to_dict(self):
        return {"efficient_profiles": [list(p) for p in self.efficient_profiles],
                "payment_caps": self.payment_caps, "feasible": self.feasible,
                "binding_ev": self.binding_ev}


def check_joint_feasibility(valuations, day_ahead: DayAheadState, T: int, N: int, ids=None,
                            tol: float = DEFAULT_TOLERANCE) -> JointFeasibility:
    """Can efficiency, reservation awareness and no subsidy hold together here?

    Reservation awareness caps EV i's total payment at ``v_i[x_i] - g_i``;
    no subsidy needs that cap to be non-negative for every EV at some
    efficient allocation.
    """
    ids = [str(k + 1) for k in range(len(valuations))] if ids is None else list(ids)
    guarantees = day_ahead.guarantee(valuations)
    profiles = all_optimal_profiles(SolveSpec.make(valuations, (N,) * T), tol)
    caps = [[v[x - 1] - g for v, x, g in zip(valuations, prof, guarantees)] for prof in profiles]
    feasible = any(all(c >= -tol for c in row) for row in caps)
    binding = None
    if not feasible:
        k = min(range(len(valuations)), key=lambda k: caps[0][k])
        binding = ids[k]
    return JointFeasibility(profiles, caps, feasible, binding)


@dataclass
class CePaymentSystem:
    """The two incentive constraints linking a pivotal EV's payments p and q."""

    applicable: bool
    pivotal_ev: str | None = None
    bundle_a: int | None = None
    bundle_b: int | None = None
    inequalities: list[str] = field(default_factory=list)
    # feasible iff lower <= upper for the difference p - q
    lower: float | None = None
    upper: float | None = None
    feasible: bool | None = None

    def to_dict(self):
        return dict(self.__dict__)


def check_ce_payment_infeasibility(valuations_a, valuations_b, day_ahead: DayAheadState, T: int, N: int,
                                   ids=None, tol: float = DEFAULT_TOLERANCE) -> CePaymentSystem:
    """Build the IC constraints between two profiles differing in one EV's valuation.

    With p the pivotal EV's payment in situation a (bundle k) and q in
    situation b (bundle l), truthfulness requires
    ``va[k] - p >= va[l] - q`` and ``vb[l] - q >= vb[k] - p``, i.e.
    ``vb[k] - vb[l] <= p - q <= va[k] - va[l]``.
    """
    n = len(valuations_a)
    ids = [str(k + 1) for k in range(n)] if ids is None else list(ids)
    changed = [k for k in range(n) if tuple(valuations_a[k]) != tuple(valuations_b[k])]
    if not changed:
        return CePaymentSystem(True, None, None, None, ["p - q = 0"], 0.0, 0.0, True)
    if len(changed) > 1:
        return CePaymentSystem(False)
    i = changed[0]
    capacity = (N,) * T
    k = constrained_max_welfare(valuations_a, day_ahead, capacity, tol).profile[i]
    l = constrained_max_welfare(valuations_b, day_ahead, capacity, tol).profile[i]
    va, vb = valuations_a[i], valuations_b[i]
    upper = va[k - 1] - va[l - 1]
    lower = vb[k - 1] - vb[l - 1]
    ineqs = [
        f"{va[k - 1]:g} - p >= {va[l - 1]:g} - q",
        f"{vb[l - 1]:g} - q >= {vb[k - 1]:g} - p",
    ]
    return CePaymentSystem(True, ids[i], k, l, ineqs, lower, upper, lower <= upper + tol)
