import numpy as np
import pytest
from hypothesis import given

from evmkt.model import EMPTY, DayAheadState, enumerate_bundles, is_feasible
from evmkt.scenarios import builtin
from evmkt.solver import (
    InvalidSpecError,
    SolveSpec,
    all_optimal_profiles,
    constrained_max_welfare,
    max_welfare,
    sw_minus_i,
)
from oracle import brute_force
from strategies import market, random_bids


def solve(bids, T, N):
    return max_welfare(SolveSpec.make(bids, (N,) * T))


def test_two_ev_two_slot_allocation():
    res = solve([(0, 7, 2, 7), (0, 0, 10, 10)], 2, 1)
    assert res.profile == (2, 3)
    assert res.welfare == 17


def test_single_slot_goes_to_higher_value():
    res = solve([(0, 7), (0, 10)], 1, 1)
    assert res.profile == (EMPTY, 2)
    assert res.welfare == 10


def test_zero_bids_leave_everyone_unallocated():
    res = solve([(0, 0, 0, 0)] * 3, 2, 1)
    assert res.profile == (EMPTY,) * 3
    assert res.welfare == 0


def test_dimension_mismatch():
    with pytest.raises(InvalidSpecError):
        max_welfare(SolveSpec.make([(0, 1, 2)], (1, 1)))
    with pytest.raises(InvalidSpecError):
        max_welfare(SolveSpec.make([(0, 1)], (1,), [(False, True)]))


def test_sw_minus_i():
    res = solve([(0, 7, 2, 7), (0, 0, 10, 10)], 2, 1)
    assert sw_minus_i(res, 0) == 10
    assert sw_minus_i(solve([(0, 3)], 1, 1), 0) == 0
    assert sw_minus_i(solve([(0, 7), (0, 10)], 1, 1), 1) == 0
    with pytest.raises(KeyError):
        sw_minus_i(res, 2)


@given(market())
def test_matches_brute_force_on_grid_values(case):
    T, N, bids = case
    res = solve(bids, T, N)
    welfare, profile = brute_force(bids, (N,) * T)
    assert res.welfare == welfare
    assert res.profile == profile


def test_matches_brute_force_seeded(rng):
    for _ in range(60):
        T = int(rng.integers(1, 5))
        n = int(rng.integers(1, 5))
        N = int(rng.integers(1, 3))
        bids = random_bids(rng, T, n)
        res = solve(bids, T, N)
        welfare, profile = brute_force(bids, (N,) * T)
        assert res.profile == profile
        assert abs(res.welfare - welfare) <= 1e-9


@given(market())
def test_no_single_swap_improves(case):
    T, N, bids = case
    res = solve(bids, T, N)
    u = enumerate_bundles(T)
    assert is_feasible(res.profile, u, N)
    for k in range(len(bids)):
        for j in range(1, len(u) + 1):
            alt = list(res.profile)
            alt[k] = j
            if is_feasible(alt, u, N):
                assert bids[k][j - 1] <= bids[k][res.profile[k] - 1] + 1e-9


@given(market())
def test_all_optimal_profiles_contains_tie_broken_optimum(case):
    T, N, bids = case
    spec = SolveSpec.make(bids, (N,) * T)
    profiles = all_optimal_profiles(spec)
    assert profiles[0] == max_welfare(spec).profile
    assert profiles == sorted(profiles)


def _ce_pair(situation):
    s = builtin("ex3-ce")
    return s.valuations(None if situation == 1 else "situation-2"), s.day_ahead_state()


def test_constrained_situation_one():
    v, da = _ce_pair(1)
    res = constrained_max_welfare(v, da, (1, 1, 1))
    assert res.profile == (3, 2, EMPTY)  # EV1 -> slot 2, EV2 -> slot 1
    assert res.welfare == 20


def test_constrained_situation_two():
    v, da = _ce_pair(2)
    res = constrained_max_welfare(v, da, (1, 1, 1))
    assert res.profile[0] == 4  # slot 3
    assert res.welfare == 28.5


def test_constrained_without_reservations_is_unconstrained(rng):
    for _ in range(20):
        T, n, N = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 3))
        bids = random_bids(rng, T, n)
        res = constrained_max_welfare(bids, DayAheadState.empty(n), (N,) * T)
        assert res == solve(bids, T, N)


def _random_reservations(rng, T, N, n, bids):
    """Reservations from an optimal profile under other bids, paid at most their value."""
    other = random_bids(rng, T, n)
    x0 = solve(other, T, N).profile
    p0 = tuple(float(rng.uniform(0, 1.2)) * bids[k][x0[k] - 1] for k in range(n))
    return DayAheadState(x0, p0)


def test_constrained_properties(rng):
    for _ in range(80):
        T, n, N = int(rng.integers(1, 5)), int(rng.integers(1, 5)), int(rng.integers(1, 3))
        bids = random_bids(rng, T, n)
        da = _random_reservations(rng, T, N, n, bids)
        res = constrained_max_welfare(bids, da, (N,) * T)
        free = solve(bids, T, N)
        assert res.welfare <= free.welfare + 1e-9
        g = da.guarantee(bids)
        for k, j in enumerate(res.profile):
            assert bids[k][j - 1] >= g[k] - 1e-9
        masks = [tuple(a >= g[k] - 1e-9 for a in bids[k]) for k in range(n)]
        welfare, profile = brute_force(bids, (N,) * T, masks)
        assert res.profile == profile
        assert abs(res.welfare - welfare) <= 1e-9
        if all(a <= 1e-9 for a in g):
            assert abs(res.welfare - free.welfare) <= 1e-9


def test_constrained_rejects_infeasible_reservations():
    with pytest.raises(InvalidSpecError):
        constrained_max_welfare([(0, 1), (0, 1)], DayAheadState((2, 2), (0.0, 0.0)), (1,))
