from decimal import Decimal

import numpy as np
import pytest

from src.costs import (
    capital_recovery_factor,
    cost_breakdown,
    electricity_purchase_cost,
    equivalent_capacity_charge,
    ess_life_cost,
    peak_load,
    recharge_energy_bounds,
    window_fraction,
)
from src.domain import ChargeSchedule, TariffSchedule, TimeGrid
from src.errors import DimensionMismatchError, DomainError, InfeasibleBoundsError

from conftest import make_scenario, parking

FIVE_MIN = TimeGrid(interval_count=1, interval_minutes=5)


def schedule(peb, piles, pc, pd, soc0=0.5):
    k = len(pc)
    return ChargeSchedule.from_arrays(
        np.asarray(peb).reshape(-1, k),
        np.asarray(piles).reshape(-1, k),
        np.asarray(pc, dtype=float),
        np.asarray(pd, dtype=float),
        np.full(k + 1, soc0),
    )


@pytest.mark.parametrize(
    "alpha, gamma, expected",
    [(0.05, 50, 0.0547767), (0.05, 1, 1.05), (0.10, 2, 0.576190)],
)
def test_capital_recovery_factor(alpha, gamma, expected):
    assert capital_recovery_factor(alpha, gamma) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("alpha, gamma", [(0.0, 10), (1.0, 10), (0.05, 0)])
def test_capital_recovery_factor_domain(alpha, gamma):
    with pytest.raises(DomainError):
        capital_recovery_factor(alpha, gamma)


@pytest.mark.parametrize(
    "count, minutes, expected",
    [(288, 5, 1 / 365), (525600, 1, 1.0), (96, 15, 1 / 365)],
)
def test_window_fraction(count, minutes, expected):
    grid = TimeGrid.model_construct(interval_count=count, interval_minutes=minutes, start_clock=0.0)
    assert window_fraction(grid) == pytest.approx(expected, rel=1e-12)


def test_purchase_cost_of_one_bus_interval():
    scenario = make_scenario([parking(0, 0, 1, soc=0.3)], interval_count=2, interval_minutes=5)
    sched = schedule([[1]], [[1]], [0.0], [0.0])
    tariff = TariffSchedule(price_per_interval=(1.3222,))
    cost = electricity_purchase_cost(sched, scenario.fleet, tariff, FIVE_MIN)
    assert cost == pytest.approx(117 / 12 * 1.3222, abs=1e-9)
    assert cost == pytest.approx(12.8914, abs=1e-4)


def test_purchase_cost_of_storage_charging():
    scenario = make_scenario(interval_count=1, interval_minutes=5)
    sched = schedule(np.zeros((0, 1)), np.zeros((1, 1)), [100.0], [0.0])
    tariff = TariffSchedule(price_per_interval=(0.3818,))
    assert electricity_purchase_cost(sched, scenario.fleet, tariff, FIVE_MIN) == pytest.approx(3.1817, abs=1e-4)


def test_purchase_cost_of_idle_schedule_is_zero():
    scenario = make_scenario([parking(0, 0, 1, soc=0.3)], interval_count=2, interval_minutes=5)
    sched = ChargeSchedule.idle(1, 1, 2, 0.5)
    assert electricity_purchase_cost(sched, scenario.fleet, scenario.tariff, scenario.grid) == 0.0


def test_purchase_cost_rejects_wrong_bus_count():
    scenario = make_scenario([parking(0, 0, 1, soc=0.3)], interval_count=2, interval_minutes=5)
    sched = ChargeSchedule.idle(2, 2, 2, 0.5)
    with pytest.raises(DimensionMismatchError):
        electricity_purchase_cost(sched, scenario.fleet, scenario.tariff, scenario.grid)


def test_storage_life_cost():
    scenario = make_scenario(ess_capacity_kwh=800.0, interval_count=1, interval_minutes=5)
    sched = schedule(np.zeros((0, 1)), np.zeros((1, 1)), [100.0], [0.0])
    assert ess_life_cost(sched, scenario.ess, scenario.cost, FIVE_MIN) == pytest.approx(2.0444, abs=1e-4)


def test_storage_life_cost_is_linear_in_throughput():
    scenario = make_scenario(ess_capacity_kwh=800.0, interval_count=2, interval_minutes=5)
    grid = scenario.grid
    split = schedule(np.zeros((0, 2)), np.zeros((1, 2)), [50.0, 50.0], [0.0, 0.0])
    lumped = schedule(np.zeros((0, 2)), np.zeros((1, 2)), [100.0, 0.0], [0.0, 0.0])
    assert ess_life_cost(split, scenario.ess, scenario.cost, grid) == pytest.approx(
        ess_life_cost(lumped, scenario.ess, scenario.cost, grid)
    )


def test_peak_load():
    scenario = make_scenario(
        [parking(0, 0, 2, soc=0.3)], interval_count=3, interval_minutes=5, other_loads=[100.0, 200.0, 150.0]
    )
    fleet, station = scenario.fleet, scenario.station
    idle = ChargeSchedule.idle(1, 1, 3, 0.5)
    assert peak_load(idle, fleet, station) == 200.0

    charging = schedule([[0, 1, 0]], [[0, 1, 0]], [0, 0, 0], [0, 0, 0])
    assert peak_load(charging, fleet, station) == pytest.approx(317.0)

    shaved = schedule([[0, 1, 0]], [[0, 1, 0]], [0, 0, 0], [0, 117.0, 0])
    assert peak_load(shaved, fleet, station) == pytest.approx(200.0)


def test_equivalent_capacity_charge():
    scenario = make_scenario(interval_count=288, interval_minutes=5)
    assert equivalent_capacity_charge(1000.0, scenario.cost, scenario.grid) == pytest.approx(2228.0, rel=1e-3)
    assert equivalent_capacity_charge(0.0, scenario.cost, scenario.grid) == 0.0
    with pytest.raises(DomainError):
        equivalent_capacity_charge(-1.0, scenario.cost, scenario.grid)


def test_recharge_bounds_no_minimum():
    fleet = make_scenario([parking(0, 0, 1, soc=0.684)]).fleet
    low, high = recharge_energy_bounds([parking(0, 0, 1, soc=0.684)], fleet, 0)
    assert low == 0.0
    assert high == pytest.approx(102.384, abs=1e-3)


def test_recharge_bounds_at_the_boundary():
    fleet = make_scenario([parking(0, 0, 1, soc=0.416)]).fleet
    low, _ = recharge_energy_bounds([parking(0, 0, 1, soc=0.416)], fleet, 0)
    assert low == pytest.approx(0.0, abs=1e-9)


def test_recharge_bounds_with_a_minimum():
    fleet = make_scenario([parking(0, 0, 1, soc=0.3)]).fleet
    low, high = recharge_energy_bounds([parking(0, 0, 1, soc=0.3)], fleet, 0)
    assert low == pytest.approx(37.584, abs=1e-3)
    assert high == pytest.approx(226.8, abs=1e-3)


def test_recharge_bounds_chain_and_delivered_energy():
    events = [parking(0, 0, 2, soc=0.3), parking(0, 4, 6, delta=0.3)]
    fleet = make_scenario(events, interval_count=8).fleet
    low, high = recharge_energy_bounds(events, fleet, 1, delivered_kwh=10.0)
    assert low == pytest.approx((0.216 + 0.3 + 0.2 - 0.3) * 324 - 10.0)
    assert high == pytest.approx((0.216 + 1 - 0.3) * 324 - 10.0)


def test_recharge_bounds_errors():
    events = [parking(0, 0, 1, soc=0.3)]
    fleet = make_scenario(events).fleet
    with pytest.raises(DomainError):
        recharge_energy_bounds([], fleet, 0)
    with pytest.raises(DomainError):
        recharge_energy_bounds(events, fleet, 1)
    with pytest.raises(DomainError):
        recharge_energy_bounds([parking(0, 0, 1)], fleet, 0)
    with pytest.raises(InfeasibleBoundsError):
        recharge_energy_bounds([parking(0, 0, 1, soc=0.3, delta=0.9)], fleet, 0)


def test_cost_breakdown_annualizes_a_daily_window():
    scenario = make_scenario([parking(0, 0, 5, soc=0.3)], interval_count=288, interval_minutes=5)
    sched = ChargeSchedule.idle(1, 1, 288, 0.5)
    costs = cost_breakdown(
        sched,
        scenario.fleet,
        scenario.ess,
        scenario.station,
        scenario.tariff,
        scenario.cost,
        scenario.grid,
    )
    assert costs.window_total == costs.epc + costs.essc + costs.ecc
    assert costs.annualized_total == costs.window_total * 365
    assert costs.includes_other_loads
    assert costs.epc == costs.other_loads_cost
    assert costs.peak_kw == 100.0
    assert isinstance(costs.epc, Decimal)


def test_cost_breakdown_peak_floor():
    scenario = make_scenario([parking(0, 0, 5, soc=0.3)])
    sched = ChargeSchedule.idle(1, 1, 6, 0.5)
    costs = cost_breakdown(
        sched,
        scenario.fleet,
        scenario.ess,
        scenario.station,
        scenario.tariff,
        scenario.cost,
        scenario.grid,
        include_other_loads=False,
        peak_floor_kw=500.0,
    )
    assert costs.peak_kw == 500.0
    assert costs.epc == Decimal("0.000")
