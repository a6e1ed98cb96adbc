"""Shared fixtures: hand-built tiny scenarios small enough for the built-in solver."""

from typing import Optional, Sequence

import pytest

from src.domain import (
    CostParams,
    EssSpec,
    FleetSpec,
    ParkingEvent,
    Scenario,
    StationSpec,
    TariffSchedule,
    TimeGrid,
    Timetable,
)
from src.milp import Constraint, MilpInstance, Sense, Variable, VarKind
from src.utils.logging import setup_logging


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True, scope="session")
def _quiet_logging():
    setup_logging("WARNING", structured=False)


def parking(bus, arrival, departure, soc=None, delta=0.216, open_start=False, open_end=False) -> ParkingEvent:
    return ParkingEvent(
        bus_id=bus,
        arrival_interval=arrival,
        departure_interval=departure,
        arrival_soc=soc,
        next_trip_delta_soc=delta,
        open_start=open_start,
        open_end=open_end,
    )


def make_scenario(
    events: Sequence[ParkingEvent] = (),
    bus_count: Optional[int] = None,
    pile_count: int = 1,
    interval_count: int = 6,
    interval_minutes: float = 60.0,
    prices: Optional[Sequence[float]] = None,
    other_loads: Optional[Sequence[float]] = None,
    ess_capacity_kwh: float = 0.0,
    ess_max_kw: float = 1000.0,
    ess_eff: float = 0.92,
    ess_initial_soc: float = 0.5,
    ess_unit_price: float = 4000.0,
    capacity_charge: float = 14847.0,
    battery_kwh: float = 324.0,
) -> Scenario:
    """Station with the case-study bus and storage constants on a short grid."""
    if bus_count is None:
        bus_count = max((ev.bus_id for ev in events), default=-1) + 1
    if prices is None:
        prices = [0.3818, 0.3818, 1.4409, 1.4409, 0.8395, 0.3818, 0.3818, 1.3222][:interval_count]
        prices += [0.8395] * (interval_count - len(prices))
    if other_loads is None:
        other_loads = [100.0] * interval_count
    return Scenario(
        grid=TimeGrid(interval_count=interval_count, interval_minutes=interval_minutes),
        tariff=TariffSchedule(price_per_interval=tuple(prices)),
        cost=CostParams(
            ess_unit_price=ess_unit_price,
            capacity_charge=capacity_charge,
            ess_cycle_count=15000,
            discount_rate=0.05,
            station_life_years=50,
        ),
        fleet=FleetSpec(
            battery_capacity_kwh=(battery_kwh,) * bus_count,
            rated_charge_power_kw=117.0,
            charge_efficiency=0.92,
            soc_min=0.2,
            bus_count=bus_count,
        ),
        ess=EssSpec(
            capacity_kwh=ess_capacity_kwh,
            max_charge_kw=ess_max_kw,
            max_discharge_kw=ess_max_kw,
            charge_eff=ess_eff,
            discharge_eff=ess_eff,
            soc_min=0.2,
            initial_soc=ess_initial_soc,
        ),
        station=StationSpec(pile_count=pile_count, other_loads_kw=tuple(other_loads)),
        timetable=Timetable(events=tuple(events)),
    )


def knapsack() -> MilpInstance:
    """max 10a + 6b + 4c s.t. 5a + 4b + 3c <= 8, written as a minimisation."""
    return MilpInstance(
        name="knapsack",
        variables=tuple(Variable(name=n, upper=1.0, kind=VarKind.BINARY) for n in "abc"),
        constraints=(Constraint(name="cap", coefficients=((0, 5.0), (1, 4.0), (2, 3.0)), sense=Sense.LE, rhs=8.0),),
        objective=((0, -10.0), (1, -6.0), (2, -4.0)),
    )


@pytest.fixture
def one_bus_scenario() -> Scenario:
    """One bus parked 0..5 needing 37.584 kWh (one hourly interval)."""
    return make_scenario([parking(0, 0, 5, soc=0.3)])


@pytest.fixture
def daily_scenario() -> Scenario:
    """One bus over a 6-hour day: parked at start, one trip, parked overnight."""
    return make_scenario(
        [
            parking(0, 0, 2, soc=0.3, delta=0.2, open_start=True),
            parking(0, 4, 8, delta=0.2, open_end=True),
        ],
        ess_capacity_kwh=100.0,
        ess_max_kw=100.0,
    )
