import numpy as np
import pytest

from src.controller import (
    ControllerState,
    DeltaSocForecaster,
    StrategyKind,
    assign_piles,
    build_window,
    forecast_arrival_soc,
    pile_matrix,
    run_episode,
    step,
    uncoordinated_profile,
    uncoordinated_schedule,
    unroll_timetable,
)
from src.errors import DomainError, NumericalError, SolverUnavailableError
from src.models import WindowInput

from conftest import make_scenario, parking


def test_forecast_arrival_soc():
    assert forecast_arrival_soc(0.90, 70 / 324) == pytest.approx(0.6840, abs=1e-4)
    assert forecast_arrival_soc(0.10, 0.30) == 0.0
    assert forecast_arrival_soc(0.50, 0.50) == 0.0


def test_running_mean_forecaster():
    forecaster = DeltaSocForecaster(0.2, "running_mean", bus_count=2)
    assert forecaster.estimate(0) == 0.2
    forecaster.observe(0, 0.3)
    forecaster.observe(0, 0.1)
    assert forecaster.estimate(0) == pytest.approx(0.2)
    forecaster.observe(0, 0.5)
    assert forecaster.estimate(0) == pytest.approx(0.3)
    assert forecaster.estimate(1, planned=0.4) == 0.2
    assert forecaster.observations(0) == 3


def test_timetable_forecaster_trusts_the_plan():
    forecaster = DeltaSocForecaster.from_planned([0.1, 0.3], "timetable", bus_count=1)
    assert forecaster.prior_mean == pytest.approx(0.2)
    forecaster.observe(0, 0.9)
    assert forecaster.estimate(0, planned=0.25) == 0.25
    assert DeltaSocForecaster.from_planned([], "running_mean", 0).prior_mean == 0.2
    with pytest.raises(ValueError):
        DeltaSocForecaster(0.0)


def test_pile_assignment_keeps_running_buses_in_place():
    column, assignment = assign_piles([1, 1, 1], {1: 1}, 3)
    assert assignment == {1: 1, 0: 0, 2: 2}
    assert column == [1, 1, 1]
    column, assignment = assign_piles([0, 1, 0], {1: 2}, 3)
    assert column == [0, 0, 1]
    with pytest.raises(DomainError):
        assign_piles([1, 1], {}, 1)


def test_pile_matrix_follows_blocks():
    peb = np.array([[1, 1, 0, 0], [0, 1, 1, 1]])
    piles = pile_matrix(peb, 2)
    assert piles.tolist() == [[1, 1, 0, 0], [0, 1, 1, 1]]
    assert pile_matrix(np.zeros((0, 3)), 2).tolist() == [[0, 0, 0], [0, 0, 0]]


def test_unroll_merges_the_overnight_stay(daily_scenario):
    timeline = unroll_timetable(daily_scenario, 2)[0]
    assert [(p.arrival, p.departure) for p in timeline] == [(0, 2), (4, 8), (10, 14)]
    assert [p.open_start for p in timeline] == [True, False, False]
    assert timeline[0].initial_soc == 0.3
    assert timeline[1].initial_soc is None


def test_unroll_keeps_an_idle_bus_parked():
    scenario = make_scenario([parking(0, 0, 9, soc=0.5, open_start=True, open_end=True)])
    timeline = unroll_timetable(scenario, 3)[0]
    assert [(p.arrival, p.departure) for p in timeline] == [(0, 21)]


def test_unroll_needs_a_first_soc():
    scenario = make_scenario([parking(0, 1, 3)])
    with pytest.raises(DomainError):
        unroll_timetable(scenario, 1)


def test_controller_rejects_long_horizons(daily_scenario):
    for days in (0, 8):
        with pytest.raises(DomainError):
            ControllerState(daily_scenario, days)


def test_first_window_plugs_in_from_the_next_interval(daily_scenario):
    state = ControllerState(daily_scenario, 1)
    win = build_window(state, 0)
    assert not win.arrival_chargeable
    first, second = win.scenario.timetable.events
    assert first.open_start and first.arrival_soc == 0.3
    assert second.open_end and second.arrival_soc is None
    assert win.parkings(0)[1].first == 5
    assert win.scenario.tariff == daily_scenario.tariff


def test_uncoordinated_charges_on_arrival():
    scenario = make_scenario([parking(0, 2, 15, soc=0.3)], interval_count=20, interval_minutes=5)
    peb = uncoordinated_schedule(WindowInput.from_scenario(scenario))
    assert np.flatnonzero(peb[0]).tolist() == [2, 3, 4, 5, 6]


def test_uncoordinated_queues_for_piles():
    events = [parking(n, 2, 15, soc=0.3) for n in range(11)]
    scenario = make_scenario(events, interval_count=20, interval_minutes=5, pile_count=10)
    win = WindowInput.from_scenario(scenario)
    peb = uncoordinated_schedule(win)
    assert np.flatnonzero(peb[10]).tolist() == [7, 8, 9, 10, 11]
    assert peb.sum(axis=0).max() == 10
    assert uncoordinated_profile(win)[2] == pytest.approx(10 * 117.0)


def test_episode_logs_one_command_per_interval(daily_scenario):
    result = run_episode(daily_scenario, StrategyKind.COORDINATED_WITH_ESS)
    assert [c.interval for c in result.commands] == list(range(6))
    assert [c.plan_window_start for c in result.commands] == list(range(6))
    assert result.degradations == ()
    assert result.shortfalls == ()
    assert result.solve_count == 6

    soc = daily_scenario.ess.initial_soc
    for c in result.commands:
        soc += (c.ess_charge_kw * 0.92 - c.ess_discharge_kw / 0.92) / 100.0
        assert c.ess_soc == pytest.approx(soc, abs=1e-9)
        assert 0.2 - 1e-9 <= c.ess_soc <= 1 + 1e-9
        assert c.total_load_kw == pytest.approx(c.peb_kw + c.ess_charge_kw - c.ess_discharge_kw + c.other_load_kw)

    drawn = sum(result.bus_drawn_kwh)
    assert drawn * 0.92 == pytest.approx(sum(result.bus_charged_soc) * 324.0)
    assert result.realized_peak_kw == pytest.approx(max(c.total_load_kw for c in result.commands))
    assert result.costs.annualized_total == result.costs.window_total * 1460


def test_episode_is_deterministic(daily_scenario):
    first = run_episode(daily_scenario, StrategyKind.COORDINATED_WITH_ESS_HEURISTIC, seed=3, noise_fraction=0.1)
    second = run_episode(daily_scenario, StrategyKind.COORDINATED_WITH_ESS_HEURISTIC, seed=3, noise_fraction=0.1)
    assert first.commands == second.commands
    assert first.costs == second.costs
    assert first.model_dump_json() == second.model_dump_json()
    assert "solve_seconds" not in first.model_dump_json()


@pytest.mark.parametrize("seed", range(4))
def test_noisy_two_day_episode_replans_every_interval(daily_scenario, seed):
    result = run_episode(
        daily_scenario, StrategyKind.COORDINATED_WITH_ESS, horizon_days=2, seed=seed, noise_fraction=0.1
    )
    assert [c.interval for c in result.commands] == list(range(12))
    assert all(c.plan_window_start == c.interval for c in result.commands)
    assert not any(c.fallback for c in result.commands)
    assert result.shortfalls == ()
    assert result.degradations == ()


def test_no_storage_strategy_ignores_the_storage(daily_scenario):
    result = run_episode(daily_scenario, StrategyKind.COORDINATED_NO_ESS)
    assert result.shortfalls == ()
    assert result.ess_capacity_kwh == 0.0
    assert all(c.ess_charge_kw == 0 and c.ess_discharge_kw == 0 for c in result.commands)
    assert result.case_fingerprint == daily_scenario.case_fingerprint()


def test_uncoordinated_without_storage_keeps_soc_flat(daily_scenario):
    scenario = daily_scenario.with_ess(capacity_kwh=0.0)
    result = run_episode(scenario, StrategyKind.UNCOORDINATED_WITH_ESS)
    assert {c.ess_soc for c in result.commands} == {scenario.ess.initial_soc}
    assert result.commands[0].peb_on_charge == (1,)
    assert result.commands[1].peb_on_charge == (0,)


def test_failed_solves_fall_back_to_charging_parked_buses(daily_scenario):
    def broken(instance, config=None):
        raise NumericalError("simplex lost accuracy")

    result = run_episode(daily_scenario, StrategyKind.COORDINATED_WITH_ESS, solver=broken)
    assert len(result.degradations) == 6
    assert all(c.fallback for c in result.commands)
    assert result.commands[0].peb_on_charge == (1,)
    assert result.commands[0].solver_status == "fallback"


def test_missing_solver_is_not_masked(daily_scenario):
    def missing(instance, config=None):
        raise SolverUnavailableError("solver executable not found: cbc")

    with pytest.raises(SolverUnavailableError):
        run_episode(daily_scenario, StrategyKind.COORDINATED_WITH_ESS, solver=missing)


def test_short_stay_records_a_shortfall_and_low_soc():
    scenario = make_scenario(
        [
            parking(0, 0, 0, soc=0.2, delta=0.6, open_start=True),
            parking(0, 3, 8, delta=0.2, open_end=True),
        ]
    )
    result = run_episode(scenario, StrategyKind.COORDINATED_NO_ESS, forecast_mode="timetable", noise_fraction=0.0)
    (shortfall,) = result.shortfalls
    assert (shortfall.interval, shortfall.bus, shortfall.parking) == (0, 0, 0)
    assert shortfall.missing_kwh == pytest.approx((0.8 - 0.2) * 324 - 107.64, abs=1e-6)
    assert result.degradations[0].window_start == 0
    low = result.low_soc_events[0]
    assert (low.interval, low.bus, low.soc, low.clamped) == (3, 0, 0.0, True)


def test_step_after_the_end_is_an_error(daily_scenario):
    state = ControllerState(daily_scenario, 1)
    while not state.finished:
        record, state = step(state, StrategyKind.COORDINATED_NO_ESS)
    assert record.interval == 5
    with pytest.raises(DomainError):
        step(state, StrategyKind.COORDINATED_NO_ESS)
