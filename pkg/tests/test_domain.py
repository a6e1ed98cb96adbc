import json

import numpy as np
import pytest
from pydantic import ValidationError

from src.domain import ChargeSchedule, CostBreakdown, CostParams, ParkingEvent, Scenario, TimeGrid, Timetable

from conftest import make_scenario, parking


def test_grid_longer_than_a_week_is_rejected():
    with pytest.raises(ValidationError):
        TimeGrid(interval_count=2017, interval_minutes=5)
    assert TimeGrid(interval_count=2016, interval_minutes=5).total_minutes == 7 * 24 * 60


def test_clock_wraps_at_midnight():
    grid = TimeGrid(interval_count=288, interval_minutes=5, start_clock=23 * 60)
    assert grid.clock_of(0) == 23 * 60
    assert grid.clock_of(12) == 0.0


def test_parking_must_end_after_it_starts():
    with pytest.raises(ValidationError):
        parking(0, 5, 5)
    with pytest.raises(ValidationError):
        parking(0, 5, 4)
    # A stay in progress can be down to its departure interval.
    assert parking(0, 0, 0, soc=0.5, open_start=True).departure_interval == 0


def test_forecast_marker_in_json():
    ev = ParkingEvent.model_validate(
        {"bus_id": 0, "arrival_interval": 1, "departure_interval": 3, "arrival_soc": "forecast", "next_trip_delta_soc": 0.2}
    )
    assert ev.arrival_soc is None
    assert json.loads(ev.model_dump_json())["arrival_soc"] == "forecast"


def test_overlapping_parkings_are_rejected():
    with pytest.raises(ValidationError):
        Timetable(events=(parking(0, 0, 3, soc=0.5), parking(0, 3, 5)))


def test_scenario_checks_lengths_and_window_bounds():
    base = make_scenario([parking(0, 0, 5, soc=0.3)])
    data = base.model_dump()

    short_tariff = dict(data, tariff={"price_per_interval": [1.0] * 5})
    with pytest.raises(ValidationError):
        Scenario.model_validate(short_tariff)

    late = dict(data, timetable={"events": [parking(0, 0, 6, soc=0.3).model_dump()]})
    with pytest.raises(ValidationError):
        Scenario.model_validate(late)

    unknown_bus = dict(data, timetable={"events": [parking(1, 0, 5, soc=0.3).model_dump()]})
    with pytest.raises(ValidationError):
        Scenario.model_validate(unknown_bus)


def test_open_end_may_depart_after_the_window():
    scenario = make_scenario([parking(0, 2, 9, soc=0.3, open_end=True)])
    assert scenario.timetable.events[0].departure_interval == 9


def test_trip_larger_than_the_reserve_is_rejected():
    with pytest.raises(ValidationError):
        make_scenario([parking(0, 0, 5, soc=0.3, delta=0.85)])


def test_scenario_json_round_trip_keeps_the_fingerprint():
    scenario = make_scenario([parking(0, 0, 3, soc=0.3), parking(0, 4, 5)], ess_capacity_kwh=200.0)
    again = Scenario.model_validate_json(scenario.model_dump_json())
    assert again == scenario
    assert again.case_fingerprint() == scenario.case_fingerprint()


def test_fingerprint_ignores_storage_sizing_and_price_only():
    scenario = make_scenario([parking(0, 0, 5, soc=0.3)], ess_capacity_kwh=200.0)
    assert scenario.with_ess(capacity_kwh=800.0).case_fingerprint() == scenario.case_fingerprint()
    assert scenario.with_cost(ess_unit_price=2000.0).case_fingerprint() == scenario.case_fingerprint()
    assert scenario.with_cost(capacity_charge=1.0).case_fingerprint() != scenario.case_fingerprint()


def test_schedule_shapes_and_pile_limit():
    ok = ChargeSchedule.idle(2, 1, 3, 0.5)
    assert ok.interval_count == 3
    assert ok.ess_soc == (0.5,) * 4

    with pytest.raises(ValidationError):
        ChargeSchedule.from_arrays(
            np.ones((2, 3)), np.zeros((1, 3)), np.zeros(3), np.zeros(3), np.full(4, 0.5)
        )
    with pytest.raises(ValidationError):
        ChargeSchedule.from_arrays(
            np.zeros((1, 3)), np.zeros((1, 3)), np.zeros(3), np.zeros(3), np.full(3, 0.5)
        )
    with pytest.raises(ValidationError):
        ChargeSchedule.from_arrays(
            np.zeros((1, 3)), np.zeros((1, 3)), np.array([-1.0, 0, 0]), np.zeros(3), np.full(4, 0.5)
        )


def test_cost_breakdown_total_must_be_the_sum():
    with pytest.raises(ValidationError):
        CostBreakdown(epc=1, essc=2, ecc=3, peak_kw=0.0, window_total=7, annualized_total=0)


def test_cost_params_accept_zero_but_not_negative_prices():
    base = dict(ess_cycle_count=15000, discount_rate=0.05, station_life_years=50)
    free = CostParams(ess_unit_price=0.0, capacity_charge=0.0, **base)
    assert free.ess_unit_price == 0.0 and free.capacity_charge == 0.0
    assert "zero is accepted" in CostParams.model_fields["capacity_charge"].description
    for field in ("ess_unit_price", "capacity_charge"):
        prices = dict(ess_unit_price=4000.0, capacity_charge=14847.0)
        prices[field] = -1.0
        with pytest.raises(ValidationError):
            CostParams(**prices, **base)
