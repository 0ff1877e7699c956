"""VCG payments: one-shot, two-period with endowments, and day-ahead reserve vectors.

Every variant is expressed through the capacity vector handed to the
solver. One-shot VCG removes EV i and keeps full capacity; the two-period
variant additionally withholds EV i's day-ahead slots from the others,
which is what breaks budget balance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .model import (
    DEFAULT_TOLERANCE,
    EMPTY,
    DayAheadState,
    MechanismOutcome,
    bundle_to_slot_vector,
    enumerate_bundles,
    universe_size,
)
from .solver import SolveResult, SolveSpec, constrained_max_welfare, guarantee_mask, max_welfare, sw_minus_i


class InvalidBidError(ValueError):
    pass


@dataclass(frozen=True)
class VcgOutcome:
    result: SolveResult
    payments: tuple[float, ...]

    @property
    def allocations(self) -> tuple[int, ...]:
        return self.result.profile


def check_bids(bids: Sequence[Sequence[float]], T: int) -> tuple[tuple[float, ...], ...]:
    size = universe_size(T)
    out = []
    for k, b in enumerate(bids):
        b = tuple(float(a) for a in b)
        if len(b) != size:
            raise InvalidBidError(f"bid {k} has length {len(b)}, expected {size}")
        if b[0] != 0.0:
            raise InvalidBidError(f"bid {k}: the empty bundle must be bid at 0")
        if any(a < 0 for a in b):
            raise InvalidBidError(f"bid {k}: bids must be non-negative")
        out.append(b)
    return tuple(out)


def _without(seq, i):
    return tuple(a for k, a in enumerate(seq) if k != i)


def _vcg(bids, capacity, reduced_capacity, tol) -> VcgOutcome:
    """Allocation at ``capacity``; EV i's counterfactual uses ``reduced_capacity(i)``."""
    result = max_welfare(SolveSpec.make(bids, capacity), tol)
    payments = []
    for i in range(len(bids)):
        others = _without(bids, i)
        absent = max_welfare(SolveSpec.make(others, reduced_capacity(i)), tol).welfare
        payments.append(absent - sw_minus_i(result, i))
    return VcgOutcome(result, tuple(payments))


def vcg_outcome(bids, capacity: Sequence[int], tol: float = DEFAULT_TOLERANCE) -> VcgOutcome:
    capacity = tuple(capacity)
    bids = check_bids(bids, len(capacity))
    return _vcg(bids, capacity, lambda i: capacity, tol)


def day_ahead_vcg(bids, T: int, N: int, tol: float = DEFAULT_TOLERANCE) -> VcgOutcome:
    return vcg_outcome(bids, (N,) * T, tol)


def day_ahead_state(outcome: VcgOutcome) -> DayAheadState:
    return DayAheadState(outcome.allocations, outcome.payments)


def endowment_capacity(day_ahead: DayAheadState, i: int, T: int, N: int) -> tuple[int, ...]:
    """Port capacity left to the others once EV i's reservation is withheld."""
    slots = bundle_to_slot_vector(day_ahead.allocations[i], enumerate_bundles(T))
    return tuple(N - s for s in slots)


def tp_vcg(day_ahead: DayAheadState, bids, T: int, N: int, tol: float = DEFAULT_TOLERANCE) -> MechanismOutcome:
    """Real-time VCG treating day-ahead bundles as endowments.

    The outcome's welfare and utilities are evaluated at ``bids``.
    """
    bids = check_bids(bids, T)
    day_ahead.validate(enumerate_bundles(T), N)
    if len(day_ahead.allocations) != len(bids):
        raise InvalidBidError("one bid per EV in the day-ahead state is required")
    out = _vcg(bids, (N,) * T, lambda i: endowment_capacity(day_ahead, i, T, N), tol)
    return MechanismOutcome.build(bids, out.allocations, day_ahead.payments, out.payments)


def one_shot_vcg(bids, T: int, N: int, tol: float = DEFAULT_TOLERANCE) -> MechanismOutcome:
    """Single real-time VCG auction with no reservations at all."""
    out = vcg_outcome(bids, (N,) * T, tol)
    n = len(out.payments)
    return MechanismOutcome.build(check_bids(bids, T), out.allocations, (0.0,) * n, out.payments)


def constrained_vcg(day_ahead: DayAheadState, bids, T: int, N: int, tol: float = DEFAULT_TOLERANCE) -> MechanismOutcome:
    """Constrained-efficient allocation with externality payments.

    Every EV's bundle must be worth at least its reported guarantee
    ``b_i[x_i(0)] - p_i(0)``. EV i pays the others' welfare in the
    endowment-reduced market (guarantees still enforced) minus their welfare
    at the constrained optimum. No choice of payments can make this
    allocation rule truthful in general; the payments here exist so that the
    property engine can exhibit the violation.
    """
    bids = check_bids(bids, T)
    day_ahead.validate(enumerate_bundles(T), N)
    capacity = (N,) * T
    result = constrained_max_welfare(bids, day_ahead, capacity, tol)
    masks = [guarantee_mask(b, g, tol) for b, g in zip(bids, day_ahead.guarantee(bids))]
    p1 = []
    for i in range(len(bids)):
        reduced = endowment_capacity(day_ahead, i, T, N)
        # others' reservations are inside the reduced capacity, so keeping them stays feasible
        spec = SolveSpec.make(_without(bids, i), reduced, _without(masks, i))
        absent = max_welfare(spec, tol, require_empty=False)
        assert absent.welfare > float("-inf")
        p1.append(absent.welfare - sw_minus_i(result, i))
    return MechanismOutcome.build(bids, result.profile, day_ahead.payments, p1)


def day_ahead_reserve_vector(bids, i: int, T: int, N: int, tol: float = DEFAULT_TOLERANCE) -> tuple[float, ...]:
    """Per-bundle VCG prices for EV i computed from day-ahead bids.

    Entry j is the others' welfare with EV i absent minus their welfare when
    bundle j's slots are removed from the market.
    """
    bids = check_bids(bids, T)
    if not 0 <= i < len(bids):
        raise KeyError(f"unknown EV position {i}")
    universe = enumerate_bundles(T)
    others = _without(bids, i)
    full = (N,) * T
    absent = max_welfare(SolveSpec.make(others, full), tol).welfare
    prices = []
    for j in range(1, universe.size + 1):
        if j == EMPTY:
            prices.append(0.0)
            continue
        occupied = bundle_to_slot_vector(j, universe)
        reduced = tuple(N - s for s in occupied)
        prices.append(absent - max_welfare(SolveSpec.make(others, reduced), tol).welfare)
    return tuple(prices)
