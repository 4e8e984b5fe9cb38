import numpy as np
import pytest

from lvmc.errors import ConstraintViolationError, InvalidInputError
from lvmc.hem import (
    BATTERY_TABLE,
    BatterySpec,
    Tariff,
    battery_for_pv,
    build_schedule,
    grid_power,
    idle_schedule,
    inverter_power,
    schedule_residuals,
    stage_cost,
    transition,
)


def test_transition_examples(spec):
    assert transition(5.0, 0.0, 0.5, spec) == 5.0
    free = BatterySpec(10.0, 0.0, 5.0, 5.0, charge_efficiency=0.95)
    assert transition(0.0, 4.2, 0.5, free) == pytest.approx(1.995, abs=1e-12)
    assert transition(2.0, -2.0, 0.5, free) == pytest.approx(0.94737, abs=1e-5)


def test_transition_rejects_rate_violation(spec):
    with pytest.raises(ConstraintViolationError):
        transition(3.0, 4.3, 0.5, spec)
    with pytest.raises(ConstraintViolationError):
        transition(3.0, -4.3, 0.5, spec)


def test_inverter_and_grid_examples():
    assert inverter_power(3.0, 0.0) == 3.0
    assert inverter_power(0.0, -2.0) == 2.0
    assert inverter_power(5.0, 4.2) == pytest.approx(0.8)
    assert grid_power(1.0, 0.0, 0.96) == 1.0
    assert grid_power(0.0, 2.0, 0.96) == pytest.approx(-1.92)
    assert grid_power(3.0, -1.0, 0.96) == pytest.approx(4.04167, abs=1e-5)


def test_stage_cost_examples():
    assert stage_cost(2.0, 0.5, 0.1, 0.5) == pytest.approx(0.5)
    assert stage_cost(-2.0, 0.5, 0.1, 0.5) == pytest.approx(-0.1)
    g = grid_power(0.0, inverter_power(0.0, 0.0), 0.96)
    assert stage_cost(g, 0.5, 0.1, 0.5) == 0.0


@pytest.mark.parametrize("pv_kw,cap,power", [(0.0, 6.5, 4.2), (4.0, 6.5, 4.2), (4.5, 6.5, 4.2),
                                             (5.0, 9.8, 5.0), (6.0, 9.8, 5.0), (8.0, 14.0, 5.0),
                                             (10.0, 14.0, 5.0), (12.0, 14.0, 5.0)])
def test_battery_table(pv_kw, cap, power):
    b = battery_for_pv(pv_kw)
    assert (b.capacity_kwh, b.max_charge_kw, b.max_discharge_kw) == (cap, power, power)
    assert b.soc_min_kwh == pytest.approx(0.1 * cap)
    assert len(BATTERY_TABLE) == 3


@pytest.mark.parametrize("kw", [
    dict(capacity_kwh=5.0, soc_min_kwh=5.0, max_charge_kw=1.0, max_discharge_kw=1.0),
    dict(capacity_kwh=5.0, soc_min_kwh=-1.0, max_charge_kw=1.0, max_discharge_kw=1.0),
    dict(capacity_kwh=5.0, soc_min_kwh=0.5, max_charge_kw=0.0, max_discharge_kw=1.0),
    dict(capacity_kwh=5.0, soc_min_kwh=0.5, max_charge_kw=1.0, max_discharge_kw=1.0, charge_efficiency=1.2),
    dict(capacity_kwh=5.0, soc_min_kwh=0.5, max_charge_kw=1.0, max_discharge_kw=1.0, inverter_efficiency=0.0),
])
def test_battery_spec_validation(kw):
    with pytest.raises(InvalidInputError):
        BatterySpec(**kw)


def test_tariff_validation_and_roundtrip():
    t = Tariff.time_of_use()
    assert t.n_slots == 48 and t.peak_price == 0.55
    assert np.all(t.buy_price[28:40] == 0.55)
    back = Tariff.from_dict(t.to_dict())
    assert np.array_equal(back.buy_price, t.buy_price) and back.feed_in == t.feed_in
    with pytest.raises(InvalidInputError):
        Tariff(np.full(48, 0.2), 0.3)
    with pytest.raises(InvalidInputError):
        Tariff(np.full(48, -0.1), 0.0)
    assert t.prices_for(100).size == 100 and t.prices_for(100)[48] == t.buy_price[0]


def test_residuals_zero_for_consistent_schedule(spec, tou, day_trace):
    demand, pv = day_trace
    soc = np.clip(spec.soc_min_kwh + np.cumsum(np.r_[0.0, np.full(48, 0.1)]), None, spec.capacity_kwh)
    s = build_schedule(demand, pv, soc, spec, tou.buy_price, tou.feed_in)
    assert max(schedule_residuals(s).values()) < 1e-12
    assert s.total_cost == pytest.approx(s.step_cost.sum())


def test_idle_schedule_matches_raw_net_load(tou, day_trace):
    demand, pv = day_trace
    s = idle_schedule(demand, pv, tou.buy_price, tou.feed_in)
    expected = demand - np.where(pv >= 0, 0.96 * pv, pv)
    np.testing.assert_allclose(s.grid_power, expected)


def test_schedule_csv_columns(tmp_path, spec, tou, day_trace):
    demand, pv = day_trace
    s = build_schedule(demand, pv, np.full(49, spec.soc_min_kwh), spec, tou.buy_price, tou.feed_in)
    path = tmp_path / "s.csv"
    s.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,demand_kw,pv_kw,battery_kw,soc_kwh,grid_kw,cost"
    assert len(lines) == 49
