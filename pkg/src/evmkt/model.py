"""Goods, bundles, allocations and quasilinear utility.

Bundles are runs of consecutive slots. They are numbered 1-based in
duration-major, start-ascending order, so bundle 1 is always the empty
bundle ``()``. Allocations are plain bundle indices into that numbering.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

DEFAULT_TOLERANCE = 1e-9
EMPTY = 1

Valuation = tuple[float, ...]


class InvalidInstanceError(ValueError):
    pass


class InvalidAllocationError(ValueError):
    pass


def tolerance() -> float:
    """Comparison tolerance, overridable through ``EVMKT_TOLERANCE``."""
    raw = os.environ.get("EVMKT_TOLERANCE")
    if raw is None or raw == "":
        return DEFAULT_TOLERANCE
    value = float(raw)
    if value < 0:
        raise ValueError(f"EVMKT_TOLERANCE must be non-negative, got {raw!r}")
    return value


@dataclass(frozen=True)
class Bundle:
    start: int | None
    duration: int

    def __post_init__(self):
        if self.duration < 0:
            raise InvalidInstanceError("bundle duration must be >= 0")
        if (self.duration == 0) != (self.start is None):
            raise InvalidInstanceError("start must be absent exactly when the bundle is empty")
        if self.start is not None and self.start < 1:
            raise InvalidInstanceError("slots are 1-based")

    @classmethod
    def from_slots(cls, slots: Sequence[int]) -> "Bundle":
        slots = list(slots)
        if not slots:
            return cls(None, 0)
        if slots != list(range(slots[0], slots[0] + len(slots))):
            raise InvalidAllocationError(f"slots {slots} are not consecutive")
        return cls(slots[0], len(slots))

    @property
    def slots(self) -> tuple[int, ...]:
        if self.start is None:
            return ()
        return tuple(range(self.start, self.start + self.duration))

    def __str__(self) -> str:
        return "(" + ", ".join(str(t) for t in self.slots) + ")"


@dataclass(frozen=True)
class BundleUniverse:
    T: int
    bundles: tuple[Bundle, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)
    # 0-based slot positions per bundle index, with a dummy entry at 0
    occupancy: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {b: j for j, b in enumerate(self.bundles, start=1)})
        occ = [()] + [tuple(t - 1 for t in b.slots) for b in self.bundles]
        object.__setattr__(self, "occupancy", tuple(occ))

    @property
    def size(self) -> int:
        return len(self.bundles)

    def __len__(self) -> int:
        return len(self.bundles)

    def __getitem__(self, j: int) -> Bundle:
        """1-based lookup."""
        self.check_index(j)
        return self.bundles[j - 1]

    def index_of(self, bundle: Bundle) -> int:
        try:
            return self._index[bundle]
        except KeyError:
            raise InvalidAllocationError(f"bundle {bundle} not in universe for T={self.T}") from None

    def index_of_slots(self, slots: Sequence[int]) -> int:
        return self.index_of(Bundle.from_slots(slots))

    def check_index(self, j: int) -> None:
        if not isinstance(j, int) or isinstance(j, bool) or not 1 <= j <= len(self.bundles):
            raise InvalidAllocationError(f"bundle index {j!r} out of range 1..{len(self.bundles)}")


def universe_size(T: int) -> int:
    return 1 + T * (T + 1) // 2


def bundle_index(d: int, t: int, T: int) -> int:
    """Closed-form position of the bundle of duration ``d`` starting at ``t``."""
    if d == 0:
        return EMPTY
    return 1 + sum(T - dd + 1 for dd in range(1, d)) + t


@lru_cache(maxsize=None)
def enumerate_bundles(T: int) -> BundleUniverse:
    if not isinstance(T, int) or T < 1:
        raise InvalidInstanceError(f"T must be a positive integer, got {T!r}")
    bundles = [Bundle(None, 0)]
    for d in range(1, T + 1):
        for t in range(1, T - d + 2):
            bundles.append(Bundle(t, d))
    return BundleUniverse(T, tuple(bundles))


def bundle_to_slot_vector(x: int, universe: BundleUniverse) -> tuple[int, ...]:
    universe.check_index(x)
    occupied = set(universe.occupancy[x])
    return tuple(1 if t in occupied else 0 for t in range(universe.T))


def slot_load(profile: Sequence[int], universe: BundleUniverse) -> list[int]:
    load = [0] * universe.T
    for x in profile:
        universe.check_index(x)
        for t in universe.occupancy[x]:
            load[t] += 1
    return load


def is_feasible(profile: Sequence[int], universe: BundleUniverse, N: int | Sequence[int]) -> bool:
    """Slot-wise load never exceeds the port count (or a per-slot capacity vector)."""
    capacity = [N] * universe.T if isinstance(N, int) else list(N)
    return all(l <= c for l, c in zip(slot_load(profile, universe), capacity))


def utility(v: Sequence[float], x: int, p: float) -> float:
    return v[x - 1] - p


def welfare(valuations: Sequence[Sequence[float]], profile: Sequence[int]) -> float:
    total = 0.0
    for v, x in zip(valuations, profile):
        total += v[x - 1]
    return total


def check_valuation(values: Sequence[float], universe: BundleUniverse, what: str = "valuation") -> Valuation:
    values = tuple(float(a) for a in values)
    if len(values) != universe.size:
        raise InvalidInstanceError(
            f"{what} has length {len(values)}, expected 1 + T(T+1)/2 = {universe.size} for T={universe.T}"
        )
    if values[0] != 0.0:
        raise InvalidInstanceError(f"{what}: value of the empty bundle must be 0, got {values[0]}")
    if any(a < 0 for a in values):
        raise InvalidInstanceError(f"{what}: values must be non-negative")
    return values


@dataclass(frozen=True)
class EV:
    id: str
    valuation: Valuation
    support: tuple[Valuation, ...] | None = None


@dataclass(frozen=True)
class MarketInstance:
    T: int
    N: int
    evs: tuple[EV, ...]

    def __post_init__(self):
        if self.N < 1:
            raise InvalidInstanceError("N must be >= 1")
        if not self.evs:
            raise InvalidInstanceError("at least one EV is required")
        universe = enumerate_bundles(self.T)
        ids = [ev.id for ev in self.evs]
        if len(set(ids)) != len(ids):
            raise InvalidInstanceError(f"duplicate EV ids in {ids}")
        for ev in self.evs:
            check_valuation(ev.valuation, universe, f"EV {ev.id} valuation")
            for k, s in enumerate(ev.support or ()):
                check_valuation(s, universe, f"EV {ev.id} support[{k}]")

    @property
    def universe(self) -> BundleUniverse:
        return enumerate_bundles(self.T)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(ev.id for ev in self.evs)

    @property
    def valuations(self) -> tuple[Valuation, ...]:
        return tuple(ev.valuation for ev in self.evs)

    def position(self, ev_id: str) -> int:
        try:
            return self.ids.index(ev_id)
        except ValueError:
            raise KeyError(f"unknown EV id {ev_id!r}") from None


@dataclass(frozen=True)
class DayAheadState:
    """Endowments carried into the real-time market, aligned with EV order."""

    allocations: tuple[int, ...]
    payments: tuple[float, ...]

    @classmethod
    def empty(cls, n: int) -> "DayAheadState":
        return cls((EMPTY,) * n, (0.0,) * n)

    def validate(self, universe: BundleUniverse, N: int) -> None:
        if len(self.allocations) != len(self.payments):
            raise InvalidInstanceError("day-ahead allocations and payments differ in length")
        if not is_feasible(self.allocations, universe, N):
            raise InvalidInstanceError("day-ahead allocation profile is infeasible")
        if any(p < 0 for p in self.payments):
            raise InvalidInstanceError("day-ahead payments must be non-negative")

    def guarantee(self, valuations: Sequence[Sequence[float]]) -> tuple[float, ...]:
        """Utility each EV secures by keeping its reservation."""
        return tuple(v[x - 1] - p for v, x, p in zip(valuations, self.allocations, self.payments))


@dataclass(frozen=True)
class MechanismOutcome:
    allocations: tuple[int, ...]
    day_ahead_payments: tuple[float, ...]
    real_time_payments: tuple[float, ...]
    welfare: float
    utilities: tuple[float, ...]

    @classmethod
    def build(cls, valuations, allocations, p0, p1) -> "MechanismOutcome":
        allocations = tuple(allocations)
        p0 = tuple(float(a) for a in p0)
        p1 = tuple(float(a) for a in p1)
        utils = tuple(utility(v, x, a + b) for v, x, a, b in zip(valuations, allocations, p0, p1))
        return cls(allocations, p0, p1, welfare(valuations, allocations), utils)

    @property
    def payments(self) -> tuple[float, ...]:
        return tuple(a + b for a, b in zip(self.day_ahead_payments, self.real_time_payments))

    @property
    def total_payment(self) -> float:
        return sum(self.payments)
