import pytest
from hypothesis import given
from hypothesis import strategies as st

from evmkt.model import EMPTY, DayAheadState, enumerate_bundles, is_feasible
from evmkt.posted_price import (
    KEEP,
    DayAheadVcgReserve,
    ExplicitPrices,
    InvalidRuleError,
    SimpleReserve,
    accounting_holds,
    available_bundles,
    best_response,
    delta,
    efficiency_bound_check,
    response_utility,
    run_posted_price,
    simple_reserve,
)
from evmkt.vcg import day_ahead_vcg
from strategies import market

DEADLOCK_V = [(0.0, 2.0, 7.0, 7.0), (0.0, 7.0, 2.0, 7.0)]
DEADLOCK_DA = DayAheadState((2, 3), (1.0, 1.0))


def test_available_bundles():
    u = enumerate_bundles(2)
    assert available_bundles(0, [2, 3], u, 1) == (1, 2)
    assert available_bundles(0, [EMPTY, EMPTY], u, 1) == (1, 2, 3, 4)
    assert available_bundles(0, [2, 4], u, 2) == (1, 2, 3, 4)
    assert available_bundles(1, [4, 3], u, 1) == (1,)


def test_best_response_examples():
    v = (0.0, 7.0, 2.0, 7.0)
    assert best_response(v, EMPTY, 0.0, (1, 2, 3, 4), (0.0, 1.0, 1.0, 1.0)) == 2
    assert response_utility(v, EMPTY, 0.0, (0.0, 1.0, 1.0, 1.0), 2) == 6.0
    # tie between keeping and re-selecting goes to keep
    assert best_response((0.0, 2.0, 7.0, 7.0), 2, 1.0, (1, 2), (0.0, 1.0, 1.0, 1.0)) == KEEP
    # empty bundle is always an exit option
    assert best_response((0.0, 0.5), 2, 3.0, (1, 2), (0.0, 3.0)) == 1


def test_deadlock_both_orders_keep():
    for order in ([0, 1], [1, 0]):
        outcome, records = run_posted_price(DEADLOCK_DA, DEADLOCK_V, 2, 1, order=order)
        assert [r.response for r in records] == [KEEP, KEEP]
        assert outcome.allocations == (2, 3)
        assert outcome.welfare == 4.0
        check = efficiency_bound_check(outcome, DEADLOCK_V, DEADLOCK_DA, 2, 1)
        assert (check.optimum, check.gap, check.epsilon, check.delta) == (14.0, 10.0, 10.0, 0.0)
        assert check.holds


def test_single_unreserved_ev_takes_best_bundle():
    outcome, records = run_posted_price(DayAheadState.empty(1), [(0.0, 5.0)], 1, 1)
    assert outcome.allocations == (2,)
    assert outcome.payments == (0.0,)
    assert outcome.welfare == 5.0
    assert records[0].response == 2


def test_incumbent_keeps_against_explicit_entrant_reserve():
    da = DayAheadState((2, EMPTY), (2.0, 0.0))
    rule = ExplicitPrices(((0.0, 2.0), (0.0, 8.0)))
    outcome, records = run_posted_price(da, [(0.0, 7.0), (0.0, 10.0)], 1, 1, rule=rule)
    assert [r.response for r in records] == [KEEP, KEEP]
    assert records[1].offered == (1,)
    assert outcome.welfare == 7.0
    assert all(p >= 0 for p in outcome.payments)


def test_simple_reserve_vector():
    assert simple_reserve(DEADLOCK_DA, 0, 2) == (0.0, 1.0, 1.0, 1.0)
    assert simple_reserve(DayAheadState.empty(1), 0, 2) == (0.0, 0.0, 0.0, 0.0)
    assert simple_reserve(DayAheadState.empty(1), 0, 1, default=3.0) == (0.0, 3.0)


def test_delta_examples():
    assert delta(DEADLOCK_V, DEADLOCK_DA) == 0.0
    assert delta([(0.0, 1.0)], DayAheadState.empty(1)) == 0.0
    assert delta([(0.0, 0.5)], DayAheadState((2,), (1.0,))) == 0.5


def test_reselecting_ev_pays_price_minus_refund():
    outcome, records = run_posted_price(DayAheadState((2,), (1.0,)), [(0.0, 0.0, 5.0, 5.0)], 2, 1)
    assert records[0].response == 3
    assert outcome.real_time_payments == (0.0,)
    assert outcome.payments == (1.0,)


@pytest.mark.parametrize("prices", [(0.0, 1.0, 1.0), (1.0, 1.0, 1.0, 1.0), (0.0, -1.0, 1.0, 1.0)])
def test_invalid_rules(prices):
    with pytest.raises(InvalidRuleError):
        run_posted_price(DayAheadState.empty(1), [(0.0, 1.0, 1.0, 1.0)], 2, 1, rule=ExplicitPrices((prices,)))


def test_bad_order_rejected():
    with pytest.raises(ValueError):
        run_posted_price(DEADLOCK_DA, DEADLOCK_V, 2, 1, order=[0, 0])


@st.composite
def posted_instance(draw):
    """Market plus reservations from an independent auction and arbitrary prepaid amounts."""
    T, N, bids = draw(market())
    value = st.integers(0, 8).map(float)
    size = len(bids[0])
    day_ahead_bids = [(0.0, *draw(st.lists(value, min_size=size - 1, max_size=size - 1))) for _ in bids]
    x0 = day_ahead_vcg(day_ahead_bids, T, N).allocations
    p0 = tuple(0.0 if x == EMPTY else float(draw(st.integers(0, 9))) for x in x0)
    if draw(st.booleans()):
        rule = SimpleReserve(float(draw(st.integers(0, 3))))
    else:
        rule = DayAheadVcgReserve(tuple(day_ahead_bids), N)
    order = draw(st.permutations(range(len(bids))))
    return T, N, bids, DayAheadState(x0, p0), rule, order


@given(posted_instance())
def test_posted_price_invariants(case):
    T, N, v, da, rule, order = case
    outcome, records = run_posted_price(da, v, T, N, rule=rule, order=order)
    u = enumerate_bundles(T)
    g = da.guarantee(v)
    holdings = list(da.allocations)
    for i, rec in zip(order, records):
        chosen = response_utility(v[i], da.allocations[i], da.payments[i], rec.prices, rec.response)
        for alt in [KEEP, *rec.offered]:
            assert response_utility(v[i], da.allocations[i], da.payments[i], rec.prices, alt) <= chosen + 1e-9
        if rec.response != KEEP:
            holdings[i] = rec.response
        assert is_feasible(holdings, u, N)
    assert tuple(holdings) == outcome.allocations
    for k in range(len(v)):
        assert outcome.utilities[k] >= max(g[k], 0.0) - 1e-9
        assert outcome.payments[k] >= -1e-9
    if isinstance(rule, SimpleReserve):
        assert accounting_holds(records)
        assert efficiency_bound_check(outcome, v, da, T, N).holds
