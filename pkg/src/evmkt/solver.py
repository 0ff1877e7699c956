"""Exact winner determination over bundle profiles.

Depth-first search over EVs in input order. Each EV tries its allowed
bundles in ascending index order while a running per-slot load is kept
under capacity. Branches whose optimistic bound (current welfare plus each
remaining EV's best allowed bid) cannot beat the incumbent by more than the
tolerance are cut. Since leaves are visited in lexicographic order and the
incumbent is only replaced on a strict improvement, the returned profile is
the lexicographically smallest optimal one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .model import (
    DEFAULT_TOLERANCE,
    EMPTY,
    BundleUniverse,
    DayAheadState,
    enumerate_bundles,
    slot_load,
)


class InvalidSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SolveSpec:
    bids: tuple[tuple[float, ...], ...]
    capacity: tuple[int, ...]
    allowed: tuple[tuple[bool, ...], ...] | None = None

    @classmethod
    def make(cls, bids, capacity, allowed=None) -> "SolveSpec":
        bids = tuple(tuple(float(a) for a in b) for b in bids)
        capacity = tuple(int(c) for c in capacity)
        if allowed is not None:
            allowed = tuple(tuple(bool(a) for a in m) for m in allowed)
        return cls(bids, capacity, allowed)

    @property
    def universe(self) -> BundleUniverse:
        return enumerate_bundles(len(self.capacity))

    def validate(self, require_empty: bool = True) -> None:
        if not self.capacity:
            raise InvalidSpecError("capacity vector must cover at least one slot")
        size = self.universe.size
        if any(c < 0 for c in self.capacity):
            raise InvalidSpecError("capacity must be non-negative")
        for k, b in enumerate(self.bids):
            if len(b) != size:
                raise InvalidSpecError(f"bid {k} has length {len(b)}, expected {size}")
        if self.allowed is not None:
            if len(self.allowed) != len(self.bids):
                raise InvalidSpecError("one mask per EV is required")
            for k, m in enumerate(self.allowed):
                if len(m) != size:
                    raise InvalidSpecError(f"mask {k} has length {len(m)}, expected {size}")
                if require_empty and not m[0]:
                    raise InvalidSpecError(f"mask {k} excludes the empty bundle")


@dataclass(frozen=True)
class SolveResult:
    profile: tuple[int, ...]
    welfare: float
    contributions: tuple[float, ...]


def max_welfare(spec: SolveSpec, tol: float = DEFAULT_TOLERANCE, require_empty: bool = True) -> SolveResult:
    """Welfare-maximizing profile; lexicographically smallest among ties.

    With ``require_empty=False`` masks may exclude the empty bundle; the
    result then has an empty profile and welfare ``-inf`` when nothing is
    feasible.
    """
    spec.validate(require_empty)
    return _solve(spec, tol)


@lru_cache(maxsize=200_000)
def _solve(spec: SolveSpec, tol: float) -> SolveResult:
    universe = spec.universe
    occupancy = universe.occupancy
    capacity = spec.capacity
    n = len(spec.bids)
    if n == 0:
        return SolveResult((), 0.0, ())

    # per EV: (index, value, slots) of bundles that fit the empty market
    options = []
    for k, b in enumerate(spec.bids):
        mask = spec.allowed[k] if spec.allowed is not None else None
        opts = []
        for j in range(1, universe.size + 1):
            if mask is not None and not mask[j - 1]:
                continue
            slots = occupancy[j]
            if any(capacity[t] < 1 for t in slots):
                continue
            opts.append((j, b[j - 1], slots))
        if not opts:
            return SolveResult((), float("-inf"), ())
        options.append(opts)

    suffix = [0.0] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] + max(v for _, v, _ in options[k])

    remaining = list(capacity)
    chosen = [EMPTY] * n
    best_value = float("-inf")
    best_profile: list[int] = []

    def dfs(k: int, acc: float) -> None:
        nonlocal best_value, best_profile
        if k == n:
            if acc > best_value + tol or not best_profile:
                best_value = acc
                best_profile = chosen.copy()
            return
        for j, v, slots in options[k]:
            if best_profile and acc + v + suffix[k + 1] <= best_value + tol:
                continue
            ok = True
            for t in slots:
                if remaining[t] < 1:
                    ok = False
                    break
            if not ok:
                continue
            for t in slots:
                remaining[t] -= 1
            chosen[k] = j
            dfs(k + 1, acc + v)
            for t in slots:
                remaining[t] += 1
        chosen[k] = EMPTY

    dfs(0, 0.0)
    profile = tuple(best_profile)
    contributions = tuple(b[j - 1] for b, j in zip(spec.bids, profile))
    return SolveResult(profile, best_value, contributions)


def all_optimal_profiles(spec: SolveSpec, tol: float = DEFAULT_TOLERANCE) -> list[tuple[int, ...]]:
    """Every feasible profile within ``tol`` of the optimum, in lexicographic order."""
    best = max_welfare(spec, tol)
    universe = spec.universe
    n = len(spec.bids)
    remaining = list(spec.capacity)
    chosen = [EMPTY] * n
    found = []
    masks = spec.allowed

    def dfs(k: int, acc: float) -> None:
        if k == n:
            if acc >= best.welfare - tol:
                found.append(tuple(chosen))
            return
        for j in range(1, universe.size + 1):
            if masks is not None and not masks[k][j - 1]:
                continue
            slots = universe.occupancy[j]
            if any(remaining[t] < 1 for t in slots):
                continue
            for t in slots:
                remaining[t] -= 1
            chosen[k] = j
            dfs(k + 1, acc + spec.bids[k][j - 1])
            for t in slots:
                remaining[t] += 1
        chosen[k] = EMPTY

    dfs(0, 0.0)
    return found


def sw_minus_i(result: SolveResult, i: int) -> float:
    """Welfare of everyone but EV ``i`` (0-based position) under ``result``."""
    if not 0 <= i < len(result.contributions):
        raise KeyError(f"unknown EV position {i}")
    total = 0.0
    for k, c in enumerate(result.contributions):
        if k != i:
            total += c
    return total


def guarantee_mask(v: Sequence[float], g: float, tol: float) -> tuple[bool, ...]:
    """Bundles whose value reaches the utility guarantee ``g``; empty admitted iff g <= 0."""
    return tuple(a >= g - tol for a in v)


def constrained_max_welfare(
    valuations: Sequence[Sequence[float]],
    day_ahead: DayAheadState,
    capacity: Sequence[int],
    tol: float = DEFAULT_TOLERANCE,
) -> SolveResult:
    """Welfare maximum subject to every EV receiving a bundle worth at least its guarantee."""
    universe = enumerate_bundles(len(capacity))
    if any(l > c for l, c in zip(slot_load(day_ahead.allocations, universe), capacity)):
        raise InvalidSpecError("day-ahead profile exceeds capacity")
    guarantees = day_ahead.guarantee(valuations)
    masks = [guarantee_mask(v, g, tol) for v, g in zip(valuations, guarantees)]
    spec = SolveSpec.make(valuations, capacity, masks)
    result = max_welfare(spec, tol, require_empty=False)
    assert result.profile, "no feasible constrained allocation; the day-ahead profile always is one"
    return result
