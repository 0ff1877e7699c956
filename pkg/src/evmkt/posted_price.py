"""Sequential real-time posted-price mechanism.

EVs are queried one at a time. Each sees the bundles that still fit given
everyone's current holdings (unqueried EVs still hold their reservations)
and a reserve-price vector. It either keeps its reservation at no extra
charge or cancels with a full refund and buys an offered bundle at the
posted price.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from .model import (
    DEFAULT_TOLERANCE,
    EMPTY,
    BundleUniverse,
    DayAheadState,
    MechanismOutcome,
    enumerate_bundles,
    welfare,
)
from .solver import SolveSpec, max_welfare
from .vcg import day_ahead_reserve_vector

KEEP = "keep"
Response = Union[str, int]


class InvalidRuleError(ValueError):
    pass


@dataclass(frozen=True)
class QueryRecord:
    ev: str
    offered: tuple[int, ...]
    prices: tuple[float, ...]
    response: Response
    payment_delta: float
    welfare_before: float
    welfare_after: float
    allowed_drop: float


@dataclass(frozen=True)
class SimpleReserve:
    """Price every non-empty bundle at the EV's own day-ahead payment.

    EVs without a reservation face ``default`` instead.
    """

    default: float = 0.0
    kind: str = field(default="simple", init=False)

    def prices(self, i, universe, day_ahead, history):
        if day_ahead.allocations[i] == EMPTY:
            level = self.default
        else:
            level = day_ahead.payments[i]
        return (0.0,) + (float(level),) * (universe.size - 1)

    def to_dict(self):
        return {"kind": self.kind, "default": self.default}


@dataclass(frozen=True)
class DayAheadVcgReserve:
    """Static per-bundle VCG prices computed from the day-ahead bids."""

    bids: tuple[tuple[float, ...], ...]
    N: int
    kind: str = field(default="day_ahead_vcg_vector", init=False)

    def prices(self, i, universe, day_ahead, history):
        return day_ahead_reserve_vector(self.bids, i, universe.T, self.N)

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class ExplicitPrices:
    vectors: tuple[tuple[float, ...], ...]
    kind: str = field(default="explicit", init=False)

    def prices(self, i, universe, day_ahead, history):
        return tuple(float(a) for a in self.vectors[i])

    def to_dict(self):
        return {"kind": self.kind, "prices": [list(v) for v in self.vectors]}


def simple_reserve(day_ahead: DayAheadState, i: int, T: int, default: float = 0.0) -> tuple[float, ...]:
    return SimpleReserve(default).prices(i, enumerate_bundles(T), day_ahead, ())


def available_bundles(i: int, holdings: Sequence[int], universe: BundleUniverse, N: int) -> tuple[int, ...]:
    """Bundles EV ``i`` could switch to while everyone else keeps their holding."""
    load = [0] * universe.T
    for k, x in enumerate(holdings):
        if k == i:
            continue
        for t in universe.occupancy[x]:
            load[t] += 1
    return tuple(
        j for j in range(1, universe.size + 1) if all(load[t] < N for t in universe.occupancy[j])
    )


def response_utility(v, x0: int, p0: float, prices, response: Response) -> float:
    if response == KEEP:
        return v[x0 - 1] - p0
    # refund p0, pay the posted price
    return v[response - 1] - prices[response - 1]


def best_response(v, x0: int, p0: float, offered: Sequence[int], prices, tol: float = DEFAULT_TOLERANCE) -> Response:
    """Utility-maximizing choice; ties go to keep, then the lowest bundle index."""
    best: Response = KEEP
    best_u = response_utility(v, x0, p0, prices, KEEP)
    for j in sorted(offered):
        u = response_utility(v, x0, p0, prices, j)
        if u > best_u + tol:
            best, best_u = j, u
    return best


def _check_prices(prices, size: int, ev: str) -> tuple[float, ...]:
    prices = tuple(float(a) for a in prices)
    if len(prices) != size:
        raise InvalidRuleError(f"price vector for EV {ev} has length {len(prices)}, expected {size}")
    if prices[0] != 0.0:
        raise InvalidRuleError(f"price of the empty bundle for EV {ev} must be 0")
    if any(a < 0 for a in prices):
        raise InvalidRuleError(f"negative reserve price for EV {ev}")
    return prices


def _delta_term(v, x0: int, p0: float) -> float:
    value = v[x0 - 1]
    return value if value < p0 else 0.0


def run_posted_price(
    day_ahead: DayAheadState,
    valuations: Sequence[Sequence[float]],
    T: int,
    N: int,
    rule=None,
    order: Sequence[int] | None = None,
    ids: Sequence[str] | None = None,
    overrides: Mapping[int, Response] | None = None,
    tol: float = DEFAULT_TOLERANCE,
) -> tuple[MechanismOutcome, list[QueryRecord]]:
    """Run the query loop.

    ``order`` lists EV positions in query order (default: input order).
    ``overrides`` forces the response of given EV positions, which is how
    deviations are replayed; every other EV best-responds.
    """
    universe = enumerate_bundles(T)
    n = len(valuations)
    day_ahead.validate(universe, N)
    rule = rule or SimpleReserve()
    order = list(range(n)) if order is None else list(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order {order} is not a permutation of 0..{n - 1}")
    ids = [str(k + 1) for k in range(n)] if ids is None else list(ids)
    overrides = overrides or {}

    holdings = list(day_ahead.allocations)
    p1 = [0.0] * n
    records = []
    history: list[Response] = []
    for i in order:
        v = valuations[i]
        x0, p0 = day_ahead.allocations[i], day_ahead.payments[i]
        offered = available_bundles(i, holdings, universe, N)
        prices = _check_prices(rule.prices(i, universe, day_ahead, tuple(history)), universe.size, ids[i])
        if i in overrides:
            response = overrides[i]
            if response != KEEP and response not in offered:
                raise ValueError(f"EV {ids[i]} cannot choose unavailable bundle {response}")
        else:
            response = best_response(v, x0, p0, offered, prices, tol)
        before = welfare(valuations, holdings)
        if response == KEEP:
            delta_p = 0.0
        else:
            holdings[i] = response
            delta_p = prices[response - 1] - p0
        p1[i] = delta_p
        history.append(response)
        records.append(
            QueryRecord(
                ev=ids[i],
                offered=offered,
                prices=prices,
                response=response,
                payment_delta=delta_p,
                welfare_before=before,
                welfare_after=welfare(valuations, holdings),
                allowed_drop=_delta_term(v, x0, p0),
            )
        )
    outcome = MechanismOutcome.build(valuations, holdings, day_ahead.payments, p1)
    return outcome, records


def delta(valuations, day_ahead: DayAheadState) -> float:
    """Total realized value of reservations worth less than what was paid for them."""
    total = 0.0
    for v, x0, p0 in zip(valuations, day_ahead.allocations, day_ahead.payments):
        total += _delta_term(v, x0, p0)
    return total


@dataclass(frozen=True)
class BoundCheck:
    gap: float
    epsilon: float
    delta: float
    optimum: float
    holds: bool

    def to_dict(self):
        return {"gap": self.gap, "epsilon": self.epsilon, "delta": self.delta,
                "optimum": self.optimum, "holds": self.holds}


def efficiency_bound_check(outcome: MechanismOutcome, valuations, day_ahead: DayAheadState, T: int, N: int,
                           tol: float = DEFAULT_TOLERANCE) -> BoundCheck:
    """Welfare gap versus how far the reservations were from optimal, plus ``delta``."""
    optimum = max_welfare(SolveSpec.make(valuations, (N,) * T), tol).welfare
    gap = optimum - outcome.welfare
    epsilon = optimum - welfare(valuations, day_ahead.allocations)
    d = delta(valuations, day_ahead)
    return BoundCheck(gap, epsilon, d, optimum, gap <= epsilon + d + tol)


def accounting_holds(records: Sequence[QueryRecord], tol: float = DEFAULT_TOLERANCE) -> bool:
    """No query lowers welfare by more than the querying EV's ``delta`` contribution."""
    return all(r.welfare_after - r.welfare_before >= -r.allowed_drop - tol for r in records)
