"""Rolling-horizon controller.

Every interval the controller executes the first interval of the last plan,
moves buses in and out of the station, then re-plans over the window that
starts at the next interval. Daily scenario data (tariff, other loads,
timetable) wraps around midnight, so every window has the scenario's length.
"""

import math
import time
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field

from .. import metrics
from ..config import settings
from ..costs import (
    breakdown_from_components,
    equivalent_capacity_charge,
    purchase_cost_from_profiles,
)
from ..domain import (
    CostBreakdown,
    ParkingEvent,
    Scenario,
    StationSpec,
    TariffSchedule,
    TimeGrid,
    Timetable,
)
from ..errors import DomainError, InfeasibleModelError, PebfcsError, SolverUnavailableError
from ..heuristic import heuristic_strategy
from ..milp import MilpSolver, SolverConfig, solve_milp
from ..models import (
    BusBoundary,
    WindowInput,
    build_model_a,
    build_model_b,
    build_model_c,
    demand_bounds,
    extract_schedule,
)
from ..piles import assign_piles
from .forecast import DeltaSocForecaster, forecast_arrival_soc

logger = structlog.get_logger()

MIN_TRIP_DELTA_SOC = 1e-4


class StrategyKind(str, Enum):
    COORDINATED_NO_ESS = "coordinated_no_ess"
    COORDINATED_WITH_ESS = "coordinated_with_ess"
    COORDINATED_WITH_ESS_HEURISTIC = "coordinated_with_ess_heuristic"
    UNCOORDINATED_WITH_ESS = "uncoordinated_with_ess"


class EpisodeParking(BaseModel):
    """One stay on the episode timeline (absolute intervals)."""

    model_config = ConfigDict(frozen=True)

    bus: int
    index: int
    arrival: int
    departure: int
    planned_delta_soc: float
    open_start: bool = False
    initial_soc: Optional[float] = None


class BusState(BaseModel):
    """Realized state of one bus."""

    soc: float
    parking: Optional[int] = None
    next_parking: Optional[int] = None
    arrival_soc: Optional[float] = None
    charging: bool = False
    block_done: bool = False
    delivered_kwh: float = 0.0
    pile: Optional[int] = None
    departure_soc: Optional[float] = None
    trip_delta_soc: Optional[float] = None
    known_arrival_soc: Optional[float] = None
    drawn_kwh: float = 0.0
    charged_soc: float = 0.0


class PlannedCommand(BaseModel):
    model_config = ConfigDict(frozen=True)

    window_start: int
    peb_on_charge: Tuple[int, ...]
    ess_charge_kw: float = 0.0
    ess_discharge_kw: float = 0.0
    fallback: bool = False
    status: str


class CommandRecord(BaseModel):
    """What was executed during one interval."""

    model_config = ConfigDict(frozen=True)

    interval: int
    clock_minutes: float
    plan_window_start: int
    peb_on_charge: Tuple[int, ...]
    pile_state: Tuple[int, ...]
    peb_kw: float
    ess_charge_kw: float
    ess_discharge_kw: float
    ess_soc: float
    other_load_kw: float
    total_load_kw: float
    price: float
    fallback: bool = False
    solver_status: str


class DemandShortfall(BaseModel):
    model_config = ConfigDict(frozen=True)

    interval: int
    bus: int
    parking: int
    missing_kwh: float


class DegradationEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    window_start: int
    reason: str


class LowSocEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    interval: int
    bus: int
    soc: float
    clamped: bool


class EpisodeResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    strategy: StrategyKind
    case_fingerprint: str
    ess_price: float
    ess_capacity_kwh: float
    horizon_days: int
    interval_minutes: float
    pile_count: int
    initial_ess_soc: float
    commands: Tuple[CommandRecord, ...]
    costs: CostBreakdown
    realized_peak_kw: float
    shortfalls: Tuple[DemandShortfall, ...] = ()
    degradations: Tuple[DegradationEvent, ...] = ()
    low_soc_events: Tuple[LowSocEvent, ...] = ()
    bus_drawn_kwh: Tuple[float, ...] = ()
    bus_charged_soc: Tuple[float, ...] = ()
    solve_count: int = 0
    # Wall-clock timing stays out of the serialized log.
    mean_solve_seconds: float = Field(0.0, exclude=True)


def unroll_timetable(scenario: Scenario, days: int) -> Dict[int, List[EpisodeParking]]:
    """Repeat the daily timetable ``days`` times on one absolute timeline.

    An overnight stay (``open_end`` on the last parking of the day) absorbs
    the next day's ``open_start`` parking.

    Raises:
        DomainError: the first parking lacks an arrival SOC, or repeated
            days overlap
    """
    K = scenario.grid.interval_count
    result: Dict[int, List[EpisodeParking]] = {}
    for n in range(scenario.fleet.bus_count):
        daily = scenario.timetable.for_bus(n)
        parkings: List[EpisodeParking] = []
        if daily and daily[0].arrival_soc is None:
            raise DomainError(f"bus {n}: first parking of the day needs a known arrival SOC")
        wraps = bool(daily) and daily[-1].open_end and daily[0].open_start
        # A bus without trips stays parked for the whole episode.
        idle = wraps and len(daily) == 1
        for day in range(days):
            offset = day * K
            for j, ev in enumerate(daily):
                if day > 0 and j == 0 and wraps:
                    continue
                arrival = ev.arrival_interval + offset
                if parkings and arrival <= parkings[-1].departure:
                    raise DomainError(
                        f"bus {n}: day {day} parking at {arrival} overlaps the stay departing "
                        f"at {parkings[-1].departure}"
                    )
                parkings.append(
                    EpisodeParking(
                        bus=n,
                        index=len(parkings),
                        arrival=arrival,
                        departure=ev.departure_interval + ((days - 1) * K if idle else offset),
                        planned_delta_soc=ev.next_trip_delta_soc,
                        open_start=day == 0 and j == 0 and ev.open_start,
                        initial_soc=ev.arrival_soc if day == 0 and j == 0 else None,
                    )
                )
        result[n] = parkings
    return result


class ControllerState:
    """Mutable state of one episode.

    Holds the realized fleet and storage state, the plan waiting to be
    executed, the executed command log and the captured events.
    """

    def __init__(
        self,
        scenario: Scenario,
        horizon_days: int,
        seed: int = 0,
        solver: Optional[MilpSolver] = None,
        config: Optional[SolverConfig] = None,
        forecast_mode: Optional[str] = None,
        noise_fraction: Optional[float] = None,
        carry_realized_peak: Optional[bool] = None,
        window_intervals: Optional[int] = None,
    ):
        if not 1 <= horizon_days <= 7:
            raise DomainError(f"horizon must be 1 to 7 days, got {horizon_days}")
        self.scenario = scenario
        self.daily_intervals = scenario.grid.interval_count
        self.total_intervals = horizon_days * self.daily_intervals
        self.window_intervals = window_intervals or self.daily_intervals
        if self.window_intervals < 1:
            raise DomainError("window must have at least one interval")
        self.solver = solver or solve_milp
        self.config = config or SolverConfig.from_settings(settings)
        self.noise_fraction = settings.forecast_noise_fraction if noise_fraction is None else noise_fraction
        self.carry_realized_peak = (
            settings.carry_realized_peak if carry_realized_peak is None else carry_realized_peak
        )
        self.rng = np.random.default_rng(seed)

        days = horizon_days + math.ceil(self.window_intervals / self.daily_intervals)
        self.parkings = unroll_timetable(scenario, days)
        planned = [ev.next_trip_delta_soc for ev in scenario.timetable.events]
        self.forecaster = DeltaSocForecaster.from_planned(
            planned, forecast_mode or settings.delta_soc_forecast, scenario.fleet.bus_count
        )

        self.buses: List[BusState] = []
        for n in range(scenario.fleet.bus_count):
            timeline = self.parkings[n]
            if not timeline:
                self.buses.append(BusState(soc=1.0))
                continue
            first = timeline[0]
            if first.open_start:
                self.buses.append(BusState(soc=first.initial_soc, parking=0, arrival_soc=first.initial_soc))
            else:
                self.buses.append(
                    BusState(soc=first.initial_soc, next_parking=0, known_arrival_soc=first.initial_soc)
                )

        self.ess_soc = scenario.ess.initial_soc
        self.interval = 0
        self.pending: Optional[PlannedCommand] = None
        self.realized_peak_kw = 0.0
        self.commands: List[CommandRecord] = []
        self.shortfalls: List[DemandShortfall] = []
        self.degradations: List[DegradationEvent] = []
        self.low_soc_events: List[LowSocEvent] = []
        self.solve_seconds: List[float] = []

    @property
    def finished(self) -> bool:
        return self.interval >= self.total_intervals

    def planned_delta(self, bus: int, parking: int) -> float:
        return self.parkings[bus][parking].planned_delta_soc

    def delta_estimate(self, bus: int, parking: int) -> float:
        """Forecast ΔSOC of the trip after ``parking``, capped by the SOC reserve."""
        estimate = self.forecaster.estimate(bus, self.planned_delta(bus, parking))
        return min(max(estimate, MIN_TRIP_DELTA_SOC), 1.0 - self.scenario.fleet.soc_min)

    def remaining_demand_kwh(self, bus: int) -> float:
        """Energy a parked bus still needs before its next departure."""
        state = self.buses[bus]
        if state.parking is None:
            return 0.0
        target = self.scenario.fleet.soc_min + self.delta_estimate(bus, state.parking)
        return max(0.0, (target - state.soc) * self.scenario.fleet.battery_capacity_kwh[bus])


def build_window(state: ControllerState, start: int) -> WindowInput:
    """Window input for intervals ``start .. start + window_intervals - 1``.

    Buses away from the station get a forecast SOC for their next arrival;
    later parkings in the window chain from it. Arrivals plug in from the
    interval after the arrival.
    """
    daily = state.scenario
    Kd, K = state.daily_intervals, state.window_intervals
    wrap = [(start + k) % Kd for k in range(K)]
    grid = TimeGrid(
        interval_count=K,
        interval_minutes=daily.grid.interval_minutes,
        start_clock=daily.grid.clock_of(start % Kd),
    )
    tariff = TariffSchedule(price_per_interval=tuple(daily.tariff.price_per_interval[i] for i in wrap))
    station = StationSpec(
        pile_count=daily.station.pile_count,
        other_loads_kw=tuple(daily.station.other_loads_kw[i] for i in wrap),
    )

    events: List[ParkingEvent] = []
    boundaries: List[BusBoundary] = []
    end = start + K - 1
    for n, bus in enumerate(state.buses):
        boundary = BusBoundary()
        first_in_window = True
        for p in state.parkings[n]:
            if p.departure < start or (bus.parking is not None and p.index < bus.parking):
                continue
            if p.arrival > end:
                break
            in_progress = bus.parking == p.index
            if in_progress:
                arrival_soc: Optional[float] = bus.arrival_soc
                boundary = BusBoundary(
                    charging_prev=bus.charging,
                    block_done=bus.block_done,
                    delivered_kwh=bus.delivered_kwh,
                    pile=bus.pile if bus.charging else None,
                )
            elif first_in_window:
                if bus.known_arrival_soc is not None:
                    arrival_soc = bus.known_arrival_soc
                else:
                    arrival_soc = forecast_arrival_soc(bus.departure_soc, state.delta_estimate(n, p.index - 1))
            else:
                arrival_soc = None
            events.append(
                ParkingEvent(
                    bus_id=n,
                    arrival_interval=max(p.arrival - start, 0),
                    departure_interval=p.departure - start,
                    arrival_soc=arrival_soc,
                    next_trip_delta_soc=state.delta_estimate(n, p.index),
                    open_start=in_progress,
                    open_end=p.departure > end,
                )
            )
            first_in_window = False
        boundaries.append(boundary)

    scenario = Scenario(
        grid=grid,
        tariff=tariff,
        cost=daily.cost,
        fleet=daily.fleet,
        ess=daily.ess,
        station=station,
        timetable=Timetable(events=tuple(events)),
    )
    return WindowInput(
        scenario=scenario,
        boundaries=tuple(boundaries),
        ess_soc=state.ess_soc,
        peak_floor_kw=state.realized_peak_kw if state.carry_realized_peak else 0.0,
        arrival_chargeable=False,
    )


def uncoordinated_schedule(win: WindowInput) -> np.ndarray:
    """Charge-on-arrival: each parking charges until its minimum is met.

    Buses queue first-in first-out for free piles; the number of intervals per
    parking is its minimum recharge rounded up to whole intervals. A bus
    already on charge at the window start keeps its place.
    """
    scenario = win.scenario
    K, N, M = win.interval_count, scenario.fleet.bus_count, scenario.station.pile_count
    per_interval = scenario.fleet.energy_per_interval(scenario.grid)
    peb = np.zeros((N, K), dtype=int)

    remaining: Dict[Tuple[int, int], int] = {}
    stays = {}
    order: List[Tuple[int, int, int, Tuple[int, int]]] = []
    for n in range(N):
        boundary = win.boundaries[n]
        planned_kwh = 0.0
        anchor_seen = None
        for parking, low, _, anchor in demand_bounds(win, n):
            if anchor != anchor_seen:
                planned_kwh, anchor_seen = 0.0, anchor
            in_progress = parking.event.open_start and parking.first == 0
            need = max(0.0, low - planned_kwh)
            intervals = min(math.ceil(need / per_interval - 1e-9), len(parking.intervals))
            if in_progress and boundary.block_done:
                intervals = 0
            planned_kwh += intervals * per_interval
            if intervals <= 0:
                continue
            key = (n, parking.index)
            remaining[key] = intervals
            stays[key] = parking
            priority = 0 if in_progress and boundary.charging_prev else 1
            order.append((parking.first, priority, n, key))
    order.sort()

    queue: List[Tuple[int, int]] = []
    active: Dict[int, Tuple[int, int]] = {}
    cursor = 0
    for k in range(K):
        for n, key in list(active.items()):
            if remaining[key] == 0 or not stays[key].contains(k):
                del active[n]
        while cursor < len(order) and order[cursor][0] <= k:
            queue.append(order[cursor][3])
            cursor += 1
        while len(active) < M and queue:
            key = queue.pop(0)
            if stays[key].contains(k) and remaining[key] > 0:
                active[key[0]] = key
        for n, key in active.items():
            peb[n, k] = 1
            remaining[key] -= 1
    return peb


def uncoordinated_profile(win: WindowInput) -> np.ndarray:
    """Bus charging load (kW) of the charge-on-arrival baseline.

    Takes only the window: ``build_window`` has already folded the controller
    state (blocks in progress, known or forecast arrival SOCs) into its
    timetable and boundaries.
    """
    return uncoordinated_schedule(win).sum(axis=0) * win.scenario.fleet.rated_charge_power_kw


def _solve_window(state: ControllerState, strategy: StrategyKind, win: WindowInput) -> Tuple[np.ndarray, float, float, str]:
    """First-interval bus column, storage powers and solver status of one window."""
    solve = state.solver
    if strategy is StrategyKind.COORDINATED_WITH_ESS_HEURISTIC:
        result = heuristic_strategy(win, state.config, solve)
        metrics.record_solve(strategy.value, "heuristic", result.wall_seconds, 0)
        schedule = result.schedule
        status = "heuristic"
    else:
        fixed = None
        if strategy is StrategyKind.COORDINATED_NO_ESS:
            instance, varmap = build_model_a(win)
        elif strategy is StrategyKind.COORDINATED_WITH_ESS:
            instance, varmap = build_model_b(win)
        else:
            fixed = uncoordinated_schedule(win)
            load = fixed.sum(axis=0) * win.scenario.fleet.rated_charge_power_kw
            instance, varmap = build_model_c(win, load)
        solution = solve(instance, config=state.config)
        metrics.record_solve(strategy.value, solution.status.value, solution.wall_seconds, solution.nodes)
        if not solution.has_incumbent:
            raise InfeasibleModelError(f"window has no solution ({solution.status.value})")
        schedule = extract_schedule(solution, varmap, win)
        status = solution.status.value
        if fixed is not None:
            return fixed[:, 0], schedule.ess_charge_kw[0], schedule.ess_discharge_kw[0], status
    column = np.array([row[0] for row in schedule.peb_on_charge], dtype=int)
    return column, schedule.ess_charge_kw[0], schedule.ess_discharge_kw[0], status


def _fallback_column(state: ControllerState) -> np.ndarray:
    """Every parked bus with demand left charges, earliest departure first."""
    candidates = []
    for n, bus in enumerate(state.buses):
        if bus.parking is None or state.remaining_demand_kwh(n) <= 1e-9:
            continue
        candidates.append((state.parkings[n][bus.parking].departure, n))
    column = np.zeros(len(state.buses), dtype=int)
    for _, n in sorted(candidates)[: state.scenario.station.pile_count]:
        column[n] = 1
    return column


def plan_window(state: ControllerState, strategy: StrategyKind, start: int) -> PlannedCommand:
    """Solve the window starting at ``start`` and keep its first interval.

    Any failure other than a missing solver executable degrades to the
    fallback command for this one interval.
    """
    started = time.perf_counter()
    try:
        win = build_window(state, start)
        column, pc, pd, status = _solve_window(state, strategy, win)
        fallback = False
    except SolverUnavailableError:
        raise
    except PebfcsError as e:
        logger.warning(
            "Window solve failed, using fallback command",
            window_start=start,
            strategy=strategy.value,
            error=str(e),
        )
        state.degradations.append(DegradationEvent(window_start=start, reason=f"{type(e).__name__}: {e}"))
        metrics.record_degradation(strategy.value)
        column, pc, pd, status, fallback = _fallback_column(state), 0.0, 0.0, "fallback", True
    elapsed = time.perf_counter() - started
    state.solve_seconds.append(elapsed)
    logger.debug("Window planned", window_start=start, status=status, seconds=round(elapsed, 4))
    return PlannedCommand(
        window_start=start,
        peb_on_charge=tuple(int(x) for x in column),
        ess_charge_kw=float(pc),
        ess_discharge_kw=float(pd),
        fallback=fallback,
        status=status,
    )


def _execute(state: ControllerState, command: PlannedCommand, t: int) -> CommandRecord:
    """Apply a planned command to interval ``t`` and advance every SOC."""
    scenario = state.scenario
    fleet, ess = scenario.fleet, scenario.ess
    dt_h = scenario.grid.interval_hours
    day_k = t % state.daily_intervals
    per_interval = fleet.energy_per_interval(scenario.grid)

    effective = []
    peb_kw = 0.0
    for n, bus in enumerate(state.buses):
        on = bool(command.peb_on_charge[n]) and bus.parking is not None
        if command.peb_on_charge[n] and bus.parking is None:
            logger.warning("Charge command for a bus that is away ignored", bus=n, interval=t)
        if on:
            capacity = fleet.battery_capacity_kwh[n]
            stored = min(per_interval, max(0.0, (1.0 - bus.soc) * capacity))
            gain = stored / capacity
            bus.soc = min(1.0, bus.soc + gain)
            bus.charged_soc += gain
            bus.delivered_kwh += stored
            bus.drawn_kwh += stored / fleet.charge_efficiency
            peb_kw += stored / fleet.charge_efficiency / dt_h
            bus.block_done = False
        elif bus.charging and bus.parking is not None:
            bus.block_done = True
        bus.charging = on
        effective.append(int(on))

    current = {n: bus.pile for n, bus in enumerate(state.buses) if bus.pile is not None}
    piles, assignment = assign_piles(effective, current, scenario.station.pile_count)
    for n, bus in enumerate(state.buses):
        bus.pile = assignment.get(n)

    pc, pd = command.ess_charge_kw, command.ess_discharge_kw
    if ess.has_storage:
        pc = min(pc, ess.max_charge_kw)
        pd = min(pd, ess.max_discharge_kw)
        room = (1.0 - state.ess_soc) * ess.capacity_kwh
        if pc * ess.charge_eff * dt_h > room:
            pc = max(0.0, room / (ess.charge_eff * dt_h))
        available = (state.ess_soc - ess.soc_min) * ess.capacity_kwh
        if pd / ess.discharge_eff * dt_h > available:
            pd = max(0.0, available * ess.discharge_eff / dt_h)
        if (pc, pd) != (command.ess_charge_kw, command.ess_discharge_kw):
            logger.debug("Storage command clipped", interval=t, charge_kw=pc, discharge_kw=pd)
        soc = state.ess_soc + (pc * ess.charge_eff - pd / ess.discharge_eff) * dt_h / ess.capacity_kwh
        state.ess_soc = min(1.0, max(ess.soc_min, soc))
    else:
        pc = pd = 0.0

    other = scenario.station.other_loads_kw[day_k]
    total = peb_kw + pc - pd + other
    state.realized_peak_kw = max(state.realized_peak_kw, total)
    return CommandRecord(
        interval=t,
        clock_minutes=scenario.grid.clock_of(day_k),
        plan_window_start=command.window_start,
        peb_on_charge=tuple(effective),
        pile_state=tuple(piles),
        peb_kw=peb_kw,
        ess_charge_kw=pc,
        ess_discharge_kw=pd,
        ess_soc=state.ess_soc,
        other_load_kw=other,
        total_load_kw=total,
        price=scenario.tariff.price_per_interval[day_k],
        fallback=command.fallback,
        solver_status=command.status,
    )


def _draw_trip(state: ControllerState, planned: float) -> float:
    """Realized ΔSOC of a trip: planned value plus Gaussian noise."""
    value = planned
    if state.noise_fraction > 0:
        value += state.rng.normal(0.0, state.noise_fraction * state.forecaster.prior_mean)
    return float(np.clip(value, MIN_TRIP_DELTA_SOC, 1.0 - state.scenario.fleet.soc_min))


def _advance_fleet(state: ControllerState, t: int) -> None:
    """Departures at the end of ``t`` and arrivals during ``t``."""
    fleet = state.scenario.fleet
    for n, bus in enumerate(state.buses):
        if bus.parking is not None:
            p = state.parkings[n][bus.parking]
            if p.departure != t:
                continue
            required = fleet.soc_min + state.delta_estimate(n, p.index)
            if bus.soc < required - 1e-6:
                missing = (required - bus.soc) * fleet.battery_capacity_kwh[n]
                logger.warning("Bus departs below its required SOC", bus=n, interval=t, missing_kwh=round(missing, 3))
                state.shortfalls.append(DemandShortfall(interval=t, bus=n, parking=p.index, missing_kwh=missing))
            bus.departure_soc = bus.soc
            bus.trip_delta_soc = _draw_trip(state, p.planned_delta_soc)
            bus.known_arrival_soc = None
            bus.parking = None
            bus.next_parking = p.index + 1 if p.index + 1 < len(state.parkings[n]) else None
            bus.charging = bus.block_done = False
            bus.delivered_kwh = 0.0
            bus.pile = None
        elif bus.next_parking is not None:
            q = state.parkings[n][bus.next_parking]
            if q.arrival != t:
                continue
            if bus.known_arrival_soc is not None:
                soc = bus.known_arrival_soc
            else:
                soc = bus.departure_soc - bus.trip_delta_soc
                state.forecaster.observe(n, bus.trip_delta_soc)
            if soc < fleet.soc_min:
                clamped = soc < 0.0
                soc = max(soc, 0.0)
                logger.warning("Bus returned below SOC_min", bus=n, interval=t, soc=round(soc, 4))
                state.low_soc_events.append(LowSocEvent(interval=t, bus=n, soc=soc, clamped=clamped))
            bus.soc = bus.arrival_soc = soc
            bus.known_arrival_soc = None
            bus.parking = q.index
            bus.next_parking = None


def step(state: ControllerState, strategy: StrategyKind) -> Tuple[CommandRecord, ControllerState]:
    """Execute one interval and plan the next.

    Raises:
        DomainError: the episode already ended
    """
    if state.finished:
        raise DomainError("episode already finished")
    t = state.interval
    if state.pending is None:
        state.pending = plan_window(state, strategy, t)
    record = _execute(state, state.pending, t)
    state.commands.append(record)
    _advance_fleet(state, t)
    state.interval = t + 1
    state.pending = None if state.finished else plan_window(state, strategy, t + 1)
    return record, state


def realized_costs(
    state: ControllerState, include_other_loads: bool
) -> CostBreakdown:
    """Costs of the executed commands over the episode, annualized by its length."""
    scenario = state.scenario
    grid = TimeGrid(interval_count=state.total_intervals, interval_minutes=scenario.grid.interval_minutes)
    dt_h = grid.interval_hours
    peb = np.array([c.peb_kw for c in state.commands])
    pc = np.array([c.ess_charge_kw for c in state.commands])
    pd = np.array([c.ess_discharge_kw for c in state.commands])
    prices = np.array([c.price for c in state.commands])
    other = np.array([c.other_load_kw for c in state.commands])
    epc = purchase_cost_from_profiles(peb, pc, pd, prices, dt_h)
    other_cost = float(np.sum(other * prices) * dt_h)
    if include_other_loads:
        epc += other_cost
    cost = scenario.cost
    essc = cost.ess_unit_price / cost.ess_cycle_count * float(np.sum(pc)) * scenario.ess.charge_eff * dt_h
    ecc = equivalent_capacity_charge(state.realized_peak_kw, cost, grid)
    return breakdown_from_components(
        epc,
        essc,
        ecc,
        state.realized_peak_kw,
        grid,
        other_loads=other_cost,
        includes_other_loads=include_other_loads,
    )


def run_episode(
    scenario: Scenario,
    strategy: StrategyKind,
    horizon_days: int = 1,
    seed: int = 0,
    solver: Optional[MilpSolver] = None,
    config: Optional[SolverConfig] = None,
    label: Optional[str] = None,
    forecast_mode: Optional[str] = None,
    noise_fraction: Optional[float] = None,
    carry_realized_peak: Optional[bool] = None,
    include_other_loads: Optional[bool] = None,
    window_intervals: Optional[int] = None,
) -> EpisodeResult:
    """Simulate ``horizon_days`` days of rolling-horizon control.

    The Model A strategy runs the station without storage. Costs, peak and
    traces are realized values from executed commands.

    Args:
        scenario: Daily scenario; its timetable repeats every day
        strategy: Planning strategy per window
        horizon_days: Simulated days (1 to 7)
        seed: Seed of the trip-consumption noise
        solver: MILP solver callable, built-in branch-and-bound by default
        config: Solver tolerances and limits
        label: Name of the run in comparison tables

    Returns:
        Episode result with the command log and realized costs
    """
    if strategy is StrategyKind.COORDINATED_NO_ESS:
        scenario = scenario.with_ess(capacity_kwh=0.0, max_charge_kw=0.0, max_discharge_kw=0.0)
    include = settings.include_other_loads if include_other_loads is None else include_other_loads
    state = ControllerState(
        scenario,
        horizon_days,
        seed=seed,
        solver=solver,
        config=config,
        forecast_mode=forecast_mode,
        noise_fraction=noise_fraction,
        carry_realized_peak=carry_realized_peak,
        window_intervals=window_intervals,
    )
    started = time.perf_counter()
    logger.info(
        "Episode started",
        strategy=strategy.value,
        intervals=state.total_intervals,
        buses=scenario.fleet.bus_count,
    )
    while not state.finished:
        step(state, strategy)

    costs = realized_costs(state, include)
    metrics.set_realized_peak(strategy.value, state.realized_peak_kw)
    solves = len(state.solve_seconds)
    logger.info(
        "Episode finished",
        strategy=strategy.value,
        annualized_total=str(costs.annualized_total),
        peak_kw=round(state.realized_peak_kw, 3),
        degradations=len(state.degradations),
        shortfalls=len(state.shortfalls),
        seconds=round(time.perf_counter() - started, 3),
    )
    return EpisodeResult(
        label=label or strategy.value,
        strategy=strategy,
        case_fingerprint=scenario.case_fingerprint(),
        ess_price=scenario.cost.ess_unit_price,
        ess_capacity_kwh=scenario.ess.capacity_kwh,
        horizon_days=horizon_days,
        interval_minutes=scenario.grid.interval_minutes,
        pile_count=scenario.station.pile_count,
        initial_ess_soc=scenario.ess.initial_soc,
        commands=tuple(state.commands),
        costs=costs,
        realized_peak_kw=state.realized_peak_kw,
        shortfalls=tuple(state.shortfalls),
        degradations=tuple(state.degradations),
        low_soc_events=tuple(state.low_soc_events),
        bus_drawn_kwh=tuple(bus.drawn_kwh for bus in state.buses),
        bus_charged_soc=tuple(bus.charged_soc for bus in state.buses),
        solve_count=solves,
        mean_solve_seconds=sum(state.solve_seconds) / solves if solves else 0.0,
    )
