"""Scenario files, the built-in worked examples, and random instance generators.

Scenarios are UTF-8 JSON with ``"format_version": 1``. Valuations are given
either explicitly per bundle or per slot and completed by a rule:

* ``max_selector``: a bundle is worth its best slot,
* ``additive``: a bundle is worth the sum of its slots.

Generated instances draw per-slot values from U[0, 1] with
``numpy.random.default_rng(seed)`` (PCG64). For each EV in order, the
realized slot values are drawn first, then its day-ahead slot values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .model import (
    EMPTY,
    EV,
    DayAheadState,
    InvalidInstanceError,
    MarketInstance,
    check_valuation,
    enumerate_bundles,
    is_feasible,
    universe_size,
)
from .vcg import day_ahead_vcg

FORMAT_VERSION = 1
MODES = ("explicit", "max_selector", "additive")
MAX_T = 6
MAX_EVS = 6


class ScenarioParseError(ValueError):
    pass


@dataclass(frozen=True)
class ValuationSpec:
    mode: str
    values: tuple[float, ...]

    def expand(self, T: int) -> tuple[float, ...]:
        universe = enumerate_bundles(T)
        if self.mode == "explicit":
            return tuple(self.values)
        out = [0.0]
        for b in universe.bundles[1:]:
            slot_values = [self.values[t - 1] for t in b.slots]
            out.append(max(slot_values) if self.mode == "max_selector" else float(sum(slot_values)))
        return tuple(out)

    def to_json(self) -> dict:
        key = "bundle_values" if self.mode == "explicit" else "slot_values"
        return {"mode": self.mode, key: list(self.values)}


@dataclass(frozen=True)
class EvSpec:
    id: str
    valuation: ValuationSpec
    day_ahead: tuple[tuple[int, ...], float] | None = None
    day_ahead_bid: ValuationSpec | None = None
    support: tuple[ValuationSpec, ...] | None = None

    def to_json(self) -> dict:
        out: dict[str, Any] = {"id": self.id}
        if self.day_ahead is not None:
            out["day_ahead"] = {"bundle": list(self.day_ahead[0]), "payment": self.day_ahead[1]}
        out["valuation"] = self.valuation.to_json()
        if self.day_ahead_bid is not None:
            out["day_ahead_bid"] = self.day_ahead_bid.to_json()
        if self.support is not None:
            out["support"] = [s.to_json() for s in self.support]
        return out


@dataclass
class Scenario:
    name: str
    T: int
    N: int
    evs: tuple[EvSpec, ...]
    mechanism: dict = field(default_factory=dict)
    variants: dict = field(default_factory=dict)
    expected: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def ids(self) -> list[str]:
        return [ev.id for ev in self.evs]

    def valuations(self, variant: str | None = None) -> tuple[tuple[float, ...], ...]:
        overrides = self.variants.get(variant, {}) if variant else {}
        if variant and variant not in self.variants:
            raise KeyError(f"scenario {self.name} has no variant {variant!r}")
        return tuple((overrides.get(ev.id) or ev.valuation).expand(self.T) for ev in self.evs)

    def supports(self):
        return [None if ev.support is None else [s.expand(self.T) for s in ev.support] for ev in self.evs]

    def day_ahead_bids(self):
        if any(ev.day_ahead_bid is None for ev in self.evs):
            return None
        return tuple(ev.day_ahead_bid.expand(self.T) for ev in self.evs)

    def instance(self, variant: str | None = None) -> MarketInstance:
        sup = self.supports()
        evs = tuple(
            EV(ev.id, v, None if s is None else tuple(tuple(x) for x in s))
            for ev, v, s in zip(self.evs, self.valuations(variant), sup)
        )
        return MarketInstance(self.T, self.N, evs)

    def day_ahead_state(self) -> DayAheadState:
        universe = enumerate_bundles(self.T)
        allocs, pays = [], []
        for ev in self.evs:
            if ev.day_ahead is None:
                allocs.append(EMPTY)
                pays.append(0.0)
            else:
                allocs.append(universe.index_of_slots(ev.day_ahead[0]))
                pays.append(float(ev.day_ahead[1]))
        return DayAheadState(tuple(allocs), tuple(pays))

    def to_json(self) -> dict:
        out: dict[str, Any] = {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "T": self.T,
            "N": self.N,
            "evs": [ev.to_json() for ev in self.evs],
            "mechanism": self.mechanism,
        }
        if self.variants:
            out["variants"] = {k: {i: s.to_json() for i, s in v.items()} for k, v in self.variants.items()}
        if self.expected:
            out["expected"] = self.expected
        if self.notes:
            out["notes"] = self.notes
        return out


# --- parsing -----------------------------------------------------------------

def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise ScenarioParseError(f"{where}: expected an object")
    if key not in obj:
        raise ScenarioParseError(f"{where}: missing required field {key!r}")
    return obj[key]


def _number_list(raw, where: str) -> tuple[float, ...]:
    if not isinstance(raw, list) or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in raw):
        raise ScenarioParseError(f"{where}: expected a list of numbers")
    return tuple(float(a) for a in raw)


def _parse_valuation(raw, T: int, where: str) -> ValuationSpec:
    mode = _require(raw, "mode", where)
    if mode not in MODES:
        raise ScenarioParseError(f"{where}.mode: unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    if mode == "explicit":
        values = _number_list(_require(raw, "bundle_values", where), f"{where}.bundle_values")
        size = universe_size(T)
        if len(values) != size:
            raise ScenarioParseError(
                f"{where}.bundle_values: length {len(values)}, expected 1 + T(T+1)/2 = {size}"
            )
    else:
        values = _number_list(_require(raw, "slot_values", where), f"{where}.slot_values")
        if len(values) != T:
            raise ScenarioParseError(f"{where}.slot_values: length {len(values)}, expected T = {T}")
    spec = ValuationSpec(mode, values)
    try:
        check_valuation(spec.expand(T), enumerate_bundles(T), where)
    except InvalidInstanceError as exc:
        raise ScenarioParseError(str(exc)) from None
    return spec


def _positive_int(raw, where: str) -> int:
    if not isinstance(raw, int) or isinstance(raw, bool) or raw < 1:
        raise ScenarioParseError(f"{where}: expected a positive integer, got {raw!r}")
    return raw


def scenario_from_json(data: Any) -> Scenario:
    version = _require(data, "format_version", "scenario")
    if version != FORMAT_VERSION:
        raise ScenarioParseError(f"scenario.format_version: unsupported version {version!r}")
    T = _positive_int(_require(data, "T", "scenario"), "scenario.T")
    N = _positive_int(_require(data, "N", "scenario"), "scenario.N")
    raw_evs = _require(data, "evs", "scenario")
    if not isinstance(raw_evs, list) or not raw_evs:
        raise ScenarioParseError("scenario.evs: expected a non-empty list")
    universe = enumerate_bundles(T)
    evs = []
    for k, raw in enumerate(raw_evs):
        where = f"evs[{k}]"
        ev_id = str(_require(raw, "id", where))
        valuation = _parse_valuation(_require(raw, "valuation", where), T, f"{where}.valuation")
        day_ahead = None
        if raw.get("day_ahead") is not None:
            da = raw["day_ahead"]
            slots = _require(da, "bundle", f"{where}.day_ahead")
            payment = _require(da, "payment", f"{where}.day_ahead")
            try:
                universe.index_of_slots(slots)
            except (ValueError, TypeError) as exc:
                raise ScenarioParseError(f"{where}.day_ahead.bundle: {exc}") from None
            if not isinstance(payment, (int, float)) or payment < 0:
                raise ScenarioParseError(f"{where}.day_ahead.payment: expected a non-negative number")
            day_ahead = (tuple(slots), float(payment))
        bid = None
        if raw.get("day_ahead_bid") is not None:
            bid = _parse_valuation(raw["day_ahead_bid"], T, f"{where}.day_ahead_bid")
        support = None
        if raw.get("support") is not None:
            if not isinstance(raw["support"], list) or not raw["support"]:
                raise ScenarioParseError(f"{where}.support: expected a non-empty list")
            support = tuple(_parse_valuation(s, T, f"{where}.support[{j}]") for j, s in enumerate(raw["support"]))
        evs.append(EvSpec(ev_id, valuation, day_ahead, bid, support))
    ids = [ev.id for ev in evs]
    if len(set(ids)) != len(ids):
        raise ScenarioParseError(f"scenario.evs: duplicate ids {ids}")
    variants = {}
    for name, overrides in (data.get("variants") or {}).items():
        variants[name] = {}
        for ev_id, raw in overrides.items():
            if ev_id not in ids:
                raise ScenarioParseError(f"variants.{name}: unknown EV id {ev_id!r}")
            variants[name][ev_id] = _parse_valuation(raw, T, f"variants.{name}.{ev_id}")
    scenario = Scenario(
        name=str(data.get("name", "")),
        T=T,
        N=N,
        evs=tuple(evs),
        mechanism=dict(data.get("mechanism") or {}),
        variants=variants,
        expected=list(data.get("expected") or []),
        notes=list(data.get("notes") or []),
    )
    if not is_feasible(scenario.day_ahead_state().allocations, universe, N):
        raise ScenarioParseError("scenario.evs: day-ahead allocations exceed the port capacity")
    return scenario


def loads_scenario(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_json(data)


def load_scenario(path) -> Scenario:
    return loads_scenario(Path(path).read_text(encoding="utf-8"))


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(dumps(scenario.to_json()), encoding="utf-8")


def save_report(report: dict, path) -> None:
    report = {"format_version": FORMAT_VERSION, **report}
    Path(path).write_text(dumps(report), encoding="utf-8")


# --- built-in examples ---------------------------------------------------------

def _explicit(*values) -> ValuationSpec:
    return ValuationSpec("explicit", tuple(float(a) for a in values))


def _maxsel(*values) -> ValuationSpec:
    return ValuationSpec("max_selector", tuple(float(a) for a in values))


def paper_examples() -> list[Scenario]:
    ex1_evs = (
        EvSpec("1", _explicit(0, 7), ((1,), 2.0), support=(_explicit(0, 7),)),
        EvSpec("2", _explicit(0, 10), support=(_explicit(0, 5), _explicit(0, 10))),
    )
    ex1 = Scenario(
        "ex1-bb", 1, 1, ex1_evs,
        mechanism={"kind": "tp-vcg"},
        expected=[
            {"mechanism": "tp-vcg", "allocation": {"1": [], "2": [1]},
             "rt_payments": {"1": -10, "2": 7}, "total_payment": -1},
            {"mechanism": "tp-vcg", "properties": {"BB": "violated", "Eff": "holds", "RA": "holds"}},
            {"mechanism": "vcg", "allocation": {"1": [], "2": [1]}, "rt_payments": {"1": 0, "2": 7}},
            {"check": "rationalizable", "rationalizable": True},
        ],
        notes=["One slot reserved by EV 1 at price 2; EV 2 values it at 10 in real time."],
    )
    ex2 = Scenario(
        "ex2-incomp", 1, 1, ex1_evs,
        mechanism={"kind": "tp-vcg"},
        expected=[
            {"check": "joint_feasibility", "feasible": False, "payment_caps": {"1": -5, "2": 10}},
        ],
        notes=[
            "Reservation awareness evaluated with the total payment p(0) + p(1) caps EV 1 at -5, "
            "since its guarantee is 7 - 2 = 5 and it receives nothing at the efficient allocation. "
            "Counting the day-ahead refund separately gives the looser cap of -3. Either cap is negative, "
            "so no subsidy fails in both readings.",
        ],
    )
    ex3 = Scenario(
        "ex3-ce", 3, 1,
        (
            EvSpec("1", _maxsel(7, 7, 4.5), ((1,), 2.0), support=(_maxsel(7, 7, 4.5), _maxsel(7, 9, 5.5))),
            EvSpec("2", _maxsel(13, 0, 0)),
            EvSpec("3", _maxsel(0, 10, 0)),
        ),
        mechanism={"kind": "constrained-eff"},
        variants={"situation-2": {"1": _maxsel(7, 9, 5.5)}},
        expected=[
            {"mechanism": "constrained-eff", "allocation": {"1": [2], "2": [1], "3": []}, "welfare": 20},
            {"mechanism": "constrained-eff", "variant": "situation-2",
             "allocation": {"1": [3], "2": [1], "3": [2]}, "welfare": 28.5},
            {"check": "ce_payment_infeasibility", "variant_b": "situation-2", "feasible": False,
             "pivotal_ev": "1", "lower": 3.5, "upper": 2.5},
            {"mechanism": "constrained-eff", "properties": {"IC": "violated"}},
        ],
        notes=["Multi-slot bundle values completed with the max-selector rule."],
    )
    ex4 = Scenario(
        "ex4-order", 2, 1,
        (
            EvSpec("1", _explicit(0, 2, 7, 7), ((1,), 1.0)),
            EvSpec("2", _explicit(0, 7, 2, 7), ((2,), 1.0)),
        ),
        mechanism={"kind": "posted-price", "price_rule": {"kind": "simple", "default": 0.0}},
        expected=[
            {"mechanism": "posted-price", "order": ["1", "2"], "responses": {"1": "keep", "2": "keep"},
             "welfare": 4},
            {"mechanism": "posted-price", "order": ["2", "1"], "responses": {"1": "keep", "2": "keep"},
             "welfare": 4},
            {"check": "efficiency_bound", "optimum": 14, "gap": 10, "epsilon": 10, "delta": 0, "holds": True},
            {"mechanism": "posted-price",
             "properties": {"IC": "holds", "RA": "holds", "IR": "holds", "BB": "holds", "NS": "holds"}},
        ],
        notes=["Both EVs would gain by swapping slots, but no query order lets the swap happen."],
    )
    exb = Scenario(
        "exB-welfare", 2, 1,
        (
            EvSpec("1", _explicit(0, 7, 2, 7)),
            EvSpec("2", _explicit(0, 0, 10, 10)),
        ),
        mechanism={"kind": "vcg"},
        expected=[
            {"mechanism": "vcg", "allocation": {"1": [1], "2": [2]}, "welfare": 17,
             "rt_payments": {"1": 0, "2": 0}},
        ],
    )
    return [ex1, ex2, ex3, ex4, exb]


def builtin(name: str) -> Scenario:
    for s in paper_examples():
        if s.name == name:
            return s
    names = ", ".join(s.name for s in paper_examples())
    raise KeyError(f"unknown built-in scenario {name!r}; available: {names}")


# --- generators ----------------------------------------------------------------

def generate(kind: str, T: int, N: int, n_evs: int, seed: int, day_ahead: str = "vcg",
             mechanism: dict | None = None) -> Scenario:
    """Random instance with per-slot values in U[0, 1].

    ``day_ahead`` selects how reservations arise: ``"vcg"`` runs the
    day-ahead VCG auction on independently drawn day-ahead valuations,
    ``"adversarial"`` does the same and then shifts every unreserved EV's
    realized slot values up by 1 so entrants outbid incumbents, and
    ``"none"`` leaves everyone without a reservation.
    """
    if kind not in ("max_selector", "additive"):
        raise ValueError(f"unknown valuation class {kind!r}")
    if not (1 <= T <= MAX_T and 1 <= n_evs <= MAX_EVS and N >= 1):
        raise ValueError(f"instance outside desk scale: T={T}, n_evs={n_evs}, N={N} (T, n_evs <= {MAX_T})")
    if day_ahead not in ("vcg", "adversarial", "none"):
        raise ValueError(f"unknown day-ahead mode {day_ahead!r}")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in 64 bits")
    rng = np.random.default_rng(seed)
    realized, early = [], []
    for _ in range(n_evs):
        realized.append([float(a) for a in rng.uniform(0.0, 1.0, size=T)])
        early.append([float(a) for a in rng.uniform(0.0, 1.0, size=T)])
    evs = []
    reservations = [None] * n_evs
    if day_ahead != "none":
        bids = [ValuationSpec(kind, tuple(e)).expand(T) for e in early]
        out = day_ahead_vcg(bids, T, N)
        universe = enumerate_bundles(T)
        for k, (x, p) in enumerate(zip(out.allocations, out.payments)):
            if x != EMPTY:
                assert p > -1e-9, p
                # VCG payments are non-negative; strip float noise
                reservations[k] = (universe[x].slots, max(0.0, float(p)))
    for k in range(n_evs):
        values = realized[k]
        if day_ahead == "adversarial" and reservations[k] is None:
            values = [a + 1.0 for a in values]
        evs.append(EvSpec(
            str(k + 1),
            ValuationSpec(kind, tuple(values)),
            reservations[k],
            None if day_ahead == "none" else ValuationSpec(kind, tuple(early[k])),
        ))
    return Scenario(f"gen-{kind}-T{T}-N{N}-n{n_evs}-s{seed}", T, N, tuple(evs), mechanism=dict(mechanism or {}))
