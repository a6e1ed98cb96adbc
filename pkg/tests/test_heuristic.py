import numpy as np
import pytest

from src.domain import ChargeSchedule
from src.heuristic import charging_time_targets, dispatch, guideline_counts, heuristic_strategy, laxity
from src.milp import SolveStatus, solve_milp
from src.models import (
    ModelKind,
    WindowInput,
    WindowParking,
    build_model_a,
    build_model_a_relaxed,
    build_model_b,
    verify_schedule,
)
from src.piles import pile_matrix

from conftest import make_scenario, parking


def test_laxity():
    stay = WindowParking(
        index=0, event=parking(0, 5, 30, soc=0.3), first=5, last=30, interior_first=6, interior_last=29
    )
    assert laxity(stay, 6, 20) == 4
    assert laxity(stay, 6, 24) == 0
    assert laxity(stay, 6, 25) == -1
    for k in (5, 30):
        with pytest.raises(ValueError):
            laxity(stay, 6, k)


def test_charging_time_counts_only_the_interior():
    scenario = make_scenario([parking(0, 5, 10, soc=0.3), parking(1, 0, 3, soc=0.9)], interval_count=12)
    win = WindowInput.from_scenario(scenario)
    relaxed = np.zeros((2, 12), dtype=int)
    relaxed[0, [5, 6, 7, 8]] = 1
    assert charging_time_targets(relaxed, win) == {(0, 0): 3, (1, 0): 0}


def test_guideline_is_capped_at_the_piles():
    relaxed = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]])
    assert list(guideline_counts(relaxed, 2)) == [2, 2, 2]
    assert list(guideline_counts(np.zeros((0, 4)), 2)) == [0, 0, 0, 0]


def test_forced_block_fills_the_interior():
    scenario = make_scenario([parking(0, 1, 5, soc=0.3)])
    win = WindowInput.from_scenario(scenario)
    plan = dispatch({(0, 0): 3}, np.zeros(6, dtype=int), win, 1)
    assert plan.peb_on_charge == ((0, 0, 1, 1, 1, 0),)
    assert plan.shortfalls == ()
    assert plan.conflicts == ()


def test_ties_start_the_longer_block_first():
    scenario = make_scenario([parking(0, 0, 7, soc=0.3), parking(1, 0, 5, soc=0.3)], interval_count=8)
    win = WindowInput.from_scenario(scenario)
    plan = dispatch({(0, 0): 4, (1, 0): 2}, np.ones(8, dtype=int), win, 1)
    assert plan.peb_on_charge[0] == (0, 1, 1, 1, 1, 0, 0, 0)
    # The shorter block never finds its pile again before departure.
    assert plan.peb_on_charge[1] == (0,) * 8
    assert plan.conflicts == (3, 4)
    assert [(s.bus, s.parking) for s in plan.shortfalls] == [(1, 0)]


def test_starts_are_capped_by_free_piles():
    events = [parking(n, 0, 7, soc=0.3) for n in range(3)]
    scenario = make_scenario(events, interval_count=8, pile_count=2)
    win = WindowInput.from_scenario(scenario)
    plan = dispatch({(n, 0): 2 for n in range(3)}, np.full(8, 3), win, 2)
    peb = plan.matrix()
    assert list(peb[:, 1]) == [1, 1, 0]
    assert list(peb[2]) == [0, 0, 0, 1, 1, 0, 0, 0]
    assert peb.sum(axis=0).max() <= 2
    schedule = ChargeSchedule.from_arrays(peb, pile_matrix(peb, 2), np.zeros(8), np.zeros(8), np.full(9, 0.5))
    assert verify_schedule(schedule, win, ModelKind.A) == []


def test_negative_laxity_truncates_and_reports():
    scenario = make_scenario([parking(0, 0, 3, soc=0.3)])
    win = WindowInput.from_scenario(scenario)
    plan = dispatch({(0, 0): 3}, np.ones(6, dtype=int), win, 1)
    assert plan.peb_on_charge == ((0, 1, 1, 0, 0, 0),)
    (shortfall,) = plan.shortfalls
    assert shortfall.interval == 1
    assert shortfall.undelivered_kwh == pytest.approx(117 * 0.92)


def test_dispatch_is_deterministic():
    events = [parking(n, n % 2, 6 + n % 2, soc=0.3) for n in range(4)]
    scenario = make_scenario(events, interval_count=8, pile_count=2)
    win = WindowInput.from_scenario(scenario)
    ct = {(n, 0): 1 + n % 3 for n in range(4)}
    guideline = np.array([0, 2, 2, 1, 2, 2, 1, 0])
    assert dispatch(ct, guideline, win, 2) == dispatch(ct, guideline, win, 2)


def test_heuristic_without_storage_is_no_better_than_model_a():
    scenario = make_scenario([parking(0, 0, 7, soc=0.3), parking(1, 1, 6, soc=0.25)], interval_count=8)
    win = WindowInput.from_scenario(scenario)
    result = heuristic_strategy(win)
    instance, _ = build_model_a(win)
    optimum = solve_milp(instance).objective
    assert result.objective >= optimum - 1e-6
    assert result.violations == ()
    assert not any(result.schedule.ess_charge_kw)
    assert result.relaxed_objective <= result.objective + 1e-6


def test_heuristic_with_storage_passes_model_b_checks(daily_scenario):
    win = WindowInput.from_scenario(daily_scenario)
    result = heuristic_strategy(win)
    assert verify_schedule(result.schedule, win, ModelKind.B) == []
    assert result.plan.shortfalls == ()
    instance, _ = build_model_b(win)
    assert result.objective >= solve_milp(instance).objective - 1e-6
    assert sum(result.schedule.peb_on_charge[0][:2]) == 1


def random_station(seed: int):
    """Two to five buses on a 6-hour half-hourly grid; every stay has at least two interior intervals."""
    rng = np.random.default_rng(100 + seed)
    buses = int(rng.integers(2, 6))
    events = []
    for n in range(buses):
        arrival = int(rng.integers(0, 6))
        departure = int(rng.integers(arrival + 3, 12))
        events.append(
            parking(n, arrival, departure, soc=float(rng.uniform(0.25, 0.6)), delta=float(rng.uniform(0.05, 0.2)))
        )
    return make_scenario(
        events,
        interval_count=12,
        interval_minutes=30.0,
        pile_count=int(rng.integers((buses + 1) // 2, buses + 1)),
    )


@pytest.mark.parametrize("seed", [*range(10), *(pytest.param(seed, marks=pytest.mark.slow) for seed in range(10, 40))])
def test_dispatch_keeps_piles_interiors_and_single_blocks(seed):
    win = WindowInput.from_scenario(random_station(seed))
    N, M, K = win.scenario.fleet.bus_count, win.scenario.station.pile_count, win.interval_count
    instance, varmap = build_model_a_relaxed(win, interior_only=True)
    relaxed = solve_milp(instance)
    assert relaxed.status is SolveStatus.OPTIMAL
    x = relaxed.value_array()
    relaxed_peb = np.array([[round(x[varmap["c", n, k]]) for k in range(K)] for n in range(N)], dtype=int)

    plan = dispatch(charging_time_targets(relaxed_peb, win), guideline_counts(relaxed_peb, M), win, M)
    peb = plan.matrix()
    assert peb.sum(axis=0).max() <= M
    for n in range(N):
        (stay,) = win.parkings(n)
        on = np.flatnonzero(peb[n])
        assert set(on.tolist()) <= set(stay.interior)
        if len(on):
            assert on[-1] - on[0] + 1 == len(on)
    if not plan.conflicts:
        assert plan.shortfalls == ()
        schedule = ChargeSchedule.from_arrays(peb, pile_matrix(peb, M), np.zeros(K), np.zeros(K), np.full(K + 1, 0.5))
        assert verify_schedule(schedule, win, ModelKind.A) == []
