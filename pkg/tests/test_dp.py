import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import toy_tariff
from lvmc.errors import ConstraintViolationError, InvalidInputError
from lvmc.hem import BatterySpec, Tariff, idle_schedule, schedule_residuals, solve_dp, solve_year
from oracles import brute_force_dp, dyadic_toy_instance


def _solve_toy(inst):
    demand, pv, prices, feed_in, kw, n_levels, j0 = inst
    spec = BatterySpec(**kw)
    soc0 = kw["soc_min_kwh"] + j0 * (kw["capacity_kwh"] - kw["soc_min_kwh"]) / (n_levels - 1)
    return solve_dp(demand, pv, spec, toy_tariff(prices, feed_in), soc0, n_levels=n_levels, balance_action=False)


@pytest.mark.parametrize("seed", range(10))
def test_matches_brute_force_exactly(seed):
    inst = dyadic_toy_instance(np.random.default_rng(seed))
    assert _solve_toy(inst).objective == brute_force_dp(*inst)


def test_four_step_three_action_example():
    # 5 levels one step apart, one step up or down per slot: 3 actions, 3^4 sequences
    kw = dict(capacity_kwh=4.5, soc_min_kwh=0.5, max_charge_kw=2.0, max_discharge_kw=2.0,
              charge_efficiency=1.0, inverter_efficiency=1.0)
    demand = np.array([1.0, 0.5, 2.0, 2.5])
    pv = np.array([2.0, 3.0, 0.0, 0.0])
    prices = np.array([0.125, 0.25, 0.75, 0.5])
    inst = (demand, pv, prices, 0.0625, kw, 5, 0)
    s = _solve_toy(inst)
    assert s.objective == brute_force_dp(*inst)
    assert set(np.round(np.diff(s.soc), 12)) <= {-1.0, 0.0, 1.0}


def test_flat_tariff_without_pv_stays_idle(spec, day_trace):
    demand, _ = day_trace
    flat = Tariff.flat(0.3, 0.05)
    s = solve_dp(demand, np.zeros(48), spec, flat, spec.soc_min_kwh)
    assert np.all(s.battery_power == 0.0)
    assert s.total_cost == pytest.approx(np.sum(0.3 * demand * 0.5), rel=1e-12)


def test_residuals_and_bounds(spec, tou, day_trace):
    demand, pv = day_trace
    s = solve_dp(demand, pv, spec, tou, spec.soc_min_kwh)
    assert max(schedule_residuals(s).values()) < 1e-9
    assert s.soc.size == 49 and s.soc[0] == spec.soc_min_kwh


def test_not_worse_than_idle(spec, tou, day_trace):
    demand, pv = day_trace
    idle = idle_schedule(demand, pv, tou.buy_price, tou.feed_in)
    for balance in (False, True):
        s = solve_dp(demand, pv, spec, tou, spec.soc_min_kwh, balance_action=balance)
        idle_obj = idle.total_cost - s.meta["terminal_price"] * spec.soc_min_kwh
        assert s.objective <= idle_obj + 1e-12
    # a day with PV surplus and an evening peak is worth scheduling
    assert s.total_cost < idle.total_cost


def test_terminal_credit_defaults_to_cheapest_price(spec, tou, day_trace):
    demand, pv = day_trace
    s = solve_dp(demand, pv, spec, tou, spec.soc_min_kwh)
    assert s.meta["terminal_price"] == pytest.approx(0.15 * spec.charge_efficiency)
    assert s.objective == pytest.approx(s.total_cost - s.meta["terminal_price"] * s.soc[-1])


def test_errors(spec, tou, day_trace):
    demand, pv = day_trace
    with pytest.raises(ConstraintViolationError):
        solve_dp(demand, pv, spec, tou, spec.capacity_kwh + 1.0)
    with pytest.raises(InvalidInputError):
        solve_dp(demand[:47], pv[:47], spec, tou, spec.soc_min_kwh)
    with pytest.raises(InvalidInputError):
        solve_dp(demand, pv, spec, tou, spec.soc_min_kwh, n_levels=1)
    with pytest.raises(InvalidInputError):
        solve_year(np.tile(demand, 2)[:50], np.tile(pv, 2)[:50], spec, tou)


def test_year_is_chained_days(spec, tou, day_trace):
    demand, pv = day_trace
    rng = np.random.default_rng(3)
    d3 = np.concatenate([demand * f for f in (1.0, 1.3, 0.7)])
    p3 = np.concatenate([pv * f for f in (1.0, 0.2, 1.1)]) * (rng.random(144) > 0.1)
    year = solve_year(d3, p3, spec, tou)
    assert year.total_cost == pytest.approx(year.meta["daily_cost"].sum(), rel=1e-12)
    soc0 = spec.soc_min_kwh
    for d in range(3):
        sl = slice(48 * d, 48 * d + 48)
        day = solve_dp(d3[sl], p3[sl], spec, tou, soc0)
        np.testing.assert_array_equal(day.soc, year.soc[48 * d:48 * d + 49])
        soc0 = day.soc[-1]
    assert max(schedule_residuals(year).values()) < 1e-9


def test_zero_trace_year(spec, tou):
    s = solve_year(np.zeros(96), np.zeros(96), spec, tou)
    assert s.total_cost == 0.0
    assert np.all(s.soc == spec.soc_min_kwh)


def test_explore_rows(spec, tou, day_trace):
    demand, pv = day_trace
    plain = solve_year(np.tile(demand, 2), np.tile(pv, 2), spec, tou)
    s = solve_year(np.tile(demand, 2), np.tile(pv, 2), spec, tou, explore=3, seed=1)
    rows = s.meta["explore"]
    assert rows.shape == (96 * 3, 3)
    np.testing.assert_array_equal(rows[:, 0], np.repeat(np.arange(96), 3))
    assert rows[:, 1:].min() >= spec.soc_min_kwh - 1e-12 and rows[:, 1:].max() <= spec.capacity_kwh + 1e-12
    eta = spec.charge_efficiency
    delta = rows[:, 2] - rows[:, 1]
    assert np.all(delta <= 0.5 * eta * spec.max_charge_kw + 1e-9)
    assert np.all(-delta <= 0.5 * spec.max_discharge_kw / eta + 1e-9)
    # exploring does not change the schedule itself
    np.testing.assert_array_equal(s.soc, plain.soc)
    again = solve_year(np.tile(demand, 2), np.tile(pv, 2), spec, tou, explore=3, seed=1)
    np.testing.assert_array_equal(again.meta["explore"], rows)


day_values = st.lists(st.integers(0, 12), min_size=48, max_size=48).map(lambda v: np.array(v) * 0.25)


@settings(max_examples=25, deadline=None)
@given(day_values, day_values)
def test_larger_capacity_never_costs_more(demand, pv):
    tou = Tariff.time_of_use()
    small = BatterySpec(4.0, 0.0, 3.0, 3.0)
    large = BatterySpec(8.0, 0.0, 3.0, 3.0)
    # nested grids with the same 0.5 kWh step: the small battery's moves are a subset
    a = solve_dp(demand, pv, small, tou, 0.0, n_levels=9, balance_action=False)
    b = solve_dp(demand, pv, large, tou, 0.0, n_levels=17, balance_action=False)
    assert b.objective <= a.objective + 1e-12


@settings(max_examples=25, deadline=None)
@given(day_values, day_values)
def test_refining_grid_never_costs_more(demand, pv):
    tou = Tariff.time_of_use()
    spec = BatterySpec.sized(6.5, 4.2)
    coarse = solve_dp(demand, pv, spec, tou, spec.soc_min_kwh, n_levels=51, balance_action=False)
    fine = solve_dp(demand, pv, spec, tou, spec.soc_min_kwh, n_levels=101, balance_action=False)
    step = (spec.capacity_kwh - spec.soc_min_kwh) / 100
    assert fine.objective <= coarse.objective + step * tou.peak_price
