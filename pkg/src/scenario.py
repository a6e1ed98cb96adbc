"""Scenario generation: the case-study station, presets and JSON I/O.

Trips are drawn with ``numpy.random.default_rng(seed)``: for every departure
in time order, one speed draw then one trip-energy draw. Buses are pooled and
rostered round-robin; when the next bus in turn is still out on the road,
the bus that has waited longest at the station takes the departure.
"""

import math
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .domain import (
    MINUTES_PER_DAY,
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
from .errors import DomainError, SchedulingConflictError

logger = structlog.get_logger()

OtherLoadKind = Literal["zero", "flat", "double-hump"]

TARIFF_PRICES: Dict[str, float] = {
    "valley": 0.3818,
    "shoulder": 0.8395,
    "high": 1.3222,
    "peak": 1.4409,
}

# (band, start hour, end hour); later entries override earlier ones.
_TARIFF_HOURS: Tuple[Tuple[str, float, float], ...] = (
    ("valley", 0, 7),
    ("valley", 23, 24),
    ("shoulder", 7, 10),
    ("shoulder", 15, 18),
    ("shoulder", 21, 23),
    ("high", 10, 15),
    ("high", 18, 21),
    ("peak", 11, 13),
    ("peak", 20, 21),
)

CASE_ESS_PRICES: Tuple[float, ...] = (8000.0, 6000.0, 4000.0, 2000.0)


class DepartureBand(BaseModel):
    """``count`` departures spread evenly over ``[start_hour, end_hour)``."""

    model_config = ConfigDict(frozen=True)

    start_hour: float = Field(..., ge=0, lt=24)
    end_hour: float = Field(..., gt=0, le=24)
    count: int = Field(..., ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> "DepartureBand":
        if self.end_hour <= self.start_hour:
            raise ValueError(f"band {self.start_hour}-{self.end_hour} is empty")
        return self

    def departure_minutes(self, scale: float = 1.0) -> List[float]:
        count = int(round(self.count * scale))
        if count <= 0:
            return []
        headway = (self.end_hour - self.start_hour) * 60.0 / count
        return [self.start_hour * 60.0 + j * headway for j in range(count)]


CASE_DEPARTURES: Tuple[DepartureBand, ...] = tuple(
    DepartureBand(start_hour=h, end_hour=h + 1, count=c)
    for h, c in (
        (6, 12), (7, 12), (8, 12), (9, 12), (10, 12), (11, 12), (12, 12), (13, 12),
        (14, 6), (15, 6), (16, 12), (17, 12), (18, 4), (19, 4), (20, 4), (21, 2), (22, 1),
    )
)


class CaseStudyParams(BaseModel):
    """Inputs of the case-study generator.

    ``scale`` multiplies the bus count and every band's departures (rounded);
    piles are given explicitly.
    """

    model_config = ConfigDict(frozen=True)

    seed: int = 0
    route_length_km: float = Field(50.0, gt=0)
    speed_mean_kmh: float = Field(50.0, gt=0)
    speed_sd: float = Field(5.0, ge=0)
    trip_energy_mean_kwh: float = Field(70.0, gt=0)
    trip_energy_sd: float = Field(7.0, ge=0)
    departures: Tuple[DepartureBand, ...] = CASE_DEPARTURES
    scale: float = Field(1.0, gt=0)

    bus_count: int = Field(24, ge=1)
    pile_count: int = Field(10, ge=1)
    battery_kwh: float = Field(324.0, gt=0)
    bus_charge_eff: float = Field(0.92, gt=0, le=1)
    rated_charge_power_kw: float = Field(117.0, gt=0)
    bus_soc_min: float = Field(0.2, ge=0, lt=1)
    initial_bus_soc: float = Field(0.5, ge=0, le=1)

    ess_capacity_kwh: float = Field(800.0, ge=0)
    ess_max_charge_kw: float = Field(1000.0, ge=0)
    ess_max_discharge_kw: float = Field(1000.0, ge=0)
    ess_charge_eff: float = Field(0.92, gt=0, le=1)
    ess_discharge_eff: float = Field(0.92, gt=0, le=1)
    ess_soc_min: float = Field(0.2, ge=0, lt=1)
    ess_initial_soc: float = Field(0.5, ge=0, le=1)
    ess_cycle_count: int = Field(15000, ge=1)
    ess_unit_price: float = Field(CASE_ESS_PRICES[0], ge=0)

    discount_rate: float = Field(0.05, gt=0, lt=1)
    station_life_years: int = Field(50, ge=1)
    capacity_charge: float = Field(14847.0, ge=0)

    interval_minutes: float = Field(5.0, gt=0)
    interval_count: Optional[int] = Field(None, ge=1)
    other_loads: OtherLoadKind = "double-hump"
    other_loads_peak_kw: float = Field(300.0, ge=0)

    @model_validator(mode="after")
    def _disjoint_bands(self) -> "CaseStudyParams":
        spans = sorted((b.start_hour, b.end_hour) for b in self.departures)
        for (_, end), (start, _) in zip(spans, spans[1:]):
            if start < end:
                raise ValueError("departure bands overlap")
        return self

    @property
    def grid(self) -> TimeGrid:
        count = self.interval_count or int(round(MINUTES_PER_DAY / self.interval_minutes))
        return TimeGrid(interval_count=count, interval_minutes=self.interval_minutes)

    @property
    def fleet_size(self) -> int:
        return max(1, int(round(self.bus_count * self.scale)))

    def departure_minutes(self) -> List[float]:
        return sorted(m for band in self.departures for m in band.departure_minutes(self.scale))


def tariff_band(clock_minutes: float) -> str:
    """Tariff band in force at a time of day."""
    hour = (clock_minutes % MINUTES_PER_DAY) / 60.0
    band = "valley"
    for name, start, end in _TARIFF_HOURS:
        if start <= hour < end:
            band = name
    return band


def default_tariff(grid: Optional[TimeGrid] = None) -> TariffSchedule:
    """Time-of-use prices of the case study on ``grid`` (288 x 5 min by default)."""
    grid = grid or TimeGrid(interval_count=288, interval_minutes=5)
    return TariffSchedule(
        price_per_interval=tuple(TARIFF_PRICES[tariff_band(grid.clock_of(k))] for k in range(grid.interval_count))
    )


def band_labels(prices) -> List[str]:
    """Band name per price, ``other`` for prices outside the case tariff."""
    labels = []
    for price in prices:
        label = next((name for name, p in TARIFF_PRICES.items() if math.isclose(price, p, abs_tol=1e-9)), "other")
        labels.append(label)
    return labels


def _bump(hour: np.ndarray, center: float, half_width: float) -> np.ndarray:
    distance = np.abs((hour - center + 12.0) % 24.0 - 12.0)
    return np.where(distance < half_width, 0.5 * (1.0 + np.cos(np.pi * distance / half_width)), 0.0)


def synth_other_loads(kind: OtherLoadKind, peak_kw: float, grid: TimeGrid) -> Tuple[float, ...]:
    """Deterministic non-bus load shapes.

    ``double-hump`` is a residential profile: a morning hump at 09:00 and a
    larger evening hump at 19:30 over a base of 20% of the peak, scaled so
    the maximum equals ``peak_kw``.

    Raises:
        DomainError: negative peak or unknown kind
    """
    if peak_kw < 0:
        raise DomainError(f"other-load peak must be nonnegative, got {peak_kw}")
    K = grid.interval_count
    if kind == "zero":
        return (0.0,) * K
    if kind == "flat":
        return (float(peak_kw),) * K
    if kind != "double-hump":
        raise DomainError(f"unknown other-load profile {kind!r}")
    hours = np.array([grid.clock_of(k) / 60.0 for k in range(K)])
    template = 0.2 + 0.8 * np.maximum(0.85 * _bump(hours, 9.0, 3.5), _bump(hours, 19.5, 3.5))
    profile = template / template.max() * peak_kw
    return tuple(float(x) for x in profile)


def _interval_of(minutes: float, grid: TimeGrid) -> int:
    return int(math.floor(minutes / grid.interval_minutes + 1e-9))


def _roster(params: CaseStudyParams, grid: TimeGrid, rng: np.random.Generator):
    """Assign departures to buses and draw every trip.

    Returns per bus a list of (departure interval, return interval, ΔSOC).
    """
    N = params.fleet_size
    trips: Dict[int, List[Tuple[int, int, float]]] = {n: [] for n in range(N)}
    available = [0] * N
    parked = [True] * N
    turn = 0
    low = max(10.0, params.speed_mean_kmh - 3 * params.speed_sd)
    high = params.speed_mean_kmh + 3 * params.speed_sd
    for minutes in params.departure_minutes():
        departure = _interval_of(minutes, grid)
        candidate = turn % N
        # A bus that starts the day parked can leave at interval 0.
        ready = [n for n in range(N) if available[n] < departure or (parked[n] and available[n] <= departure)]
        if candidate in ready:
            bus = candidate
        elif ready:
            bus = min(ready, key=lambda n: (available[n], n))
        else:
            raise SchedulingConflictError(
                f"no bus available for the departure at interval {departure}; bus {candidate} "
                f"returns at {available[candidate]}",
                bus=candidate,
                departure=departure,
                available_at=available[candidate],
            )
        turn = bus + 1

        speed = float(np.clip(rng.normal(params.speed_mean_kmh, params.speed_sd), low, high))
        energy = float(rng.normal(params.trip_energy_mean_kwh, params.trip_energy_sd))
        duration = max(1, int(round(params.route_length_km / speed * 60.0 / grid.interval_minutes)))
        delta = float(np.clip(energy / params.battery_kwh, 1e-4, 1.0 - params.bus_soc_min))
        back = departure + duration
        if back > grid.interval_count - 1:
            raise DomainError(f"bus {bus}: trip leaving at interval {departure} returns after the day ends")
        trips[bus].append((departure, back, delta))
        available[bus] = back
        parked[bus] = False
    return trips


def generate(params: CaseStudyParams) -> Scenario:
    """Build the daily case-study scenario.

    Each bus starts the day parked (``open_start``) at ``initial_bus_soc``;
    its last return of the day parks overnight (``open_end``) until its
    first departure of the next day, which repeats today's.

    Raises:
        SchedulingConflictError: a departure finds every bus out on the road
    """
    grid = params.grid
    rng = np.random.default_rng(params.seed)
    trips = _roster(params, grid, rng)
    prior = params.trip_energy_mean_kwh / params.battery_kwh

    events: List[ParkingEvent] = []
    for n in range(params.fleet_size):
        schedule = trips[n]
        if not schedule:
            events.append(
                ParkingEvent(
                    bus_id=n,
                    arrival_interval=0,
                    departure_interval=grid.interval_count,
                    arrival_soc=params.initial_bus_soc,
                    next_trip_delta_soc=min(prior, 1.0 - params.bus_soc_min),
                    open_start=True,
                    open_end=True,
                )
            )
            continue
        first_departure, _, first_delta = schedule[0]
        events.append(
            ParkingEvent(
                bus_id=n,
                arrival_interval=0,
                departure_interval=first_departure,
                arrival_soc=params.initial_bus_soc,
                next_trip_delta_soc=first_delta,
                open_start=True,
            )
        )
        for (_, back, _), (departure, _, delta) in zip(schedule, schedule[1:]):
            events.append(
                ParkingEvent(bus_id=n, arrival_interval=back, departure_interval=departure, next_trip_delta_soc=delta)
            )
        events.append(
            ParkingEvent(
                bus_id=n,
                arrival_interval=schedule[-1][1],
                departure_interval=grid.interval_count + first_departure,
                next_trip_delta_soc=first_delta,
                open_end=True,
            )
        )

    scenario = Scenario(
        grid=grid,
        tariff=default_tariff(grid),
        cost=CostParams(
            ess_unit_price=params.ess_unit_price,
            capacity_charge=params.capacity_charge,
            ess_cycle_count=params.ess_cycle_count,
            discount_rate=params.discount_rate,
            station_life_years=params.station_life_years,
        ),
        fleet=FleetSpec(
            battery_capacity_kwh=(params.battery_kwh,) * params.fleet_size,
            rated_charge_power_kw=params.rated_charge_power_kw,
            charge_efficiency=params.bus_charge_eff,
            soc_min=params.bus_soc_min,
            bus_count=params.fleet_size,
        ),
        ess=EssSpec(
            capacity_kwh=params.ess_capacity_kwh,
            max_charge_kw=params.ess_max_charge_kw,
            max_discharge_kw=params.ess_max_discharge_kw,
            charge_eff=params.ess_charge_eff,
            discharge_eff=params.ess_discharge_eff,
            soc_min=params.ess_soc_min,
            initial_soc=params.ess_initial_soc,
        ),
        station=StationSpec(
            pile_count=params.pile_count,
            other_loads_kw=synth_other_loads(params.other_loads, params.other_loads_peak_kw, grid),
        ),
        timetable=Timetable(events=tuple(events)),
    )
    logger.info(
        "Scenario generated",
        seed=params.seed,
        buses=params.fleet_size,
        departures=sum(len(t) for t in trips.values()),
        intervals=grid.interval_count,
    )
    return scenario


def case_study_params(seed: int = 0) -> CaseStudyParams:
    """24 buses, 10 piles, 288 x 5 min, first storage price of the ladder."""
    return CaseStudyParams(seed=seed)


def doubled_station_params(seed: int = 0) -> CaseStudyParams:
    """48 buses and twice the departures on a 3-minute grid."""
    return CaseStudyParams(seed=seed, scale=2.0, pile_count=20, interval_minutes=3.0)


def desk_scale_params(bus_count: int = 8, seed: int = 0, interval_minutes: float = 15.0) -> CaseStudyParams:
    """Smaller station: departures and piles thinned in proportion to the fleet."""
    if not 1 <= bus_count <= 24:
        raise DomainError(f"desk-scale fleets have 1 to 24 buses, got {bus_count}")
    return CaseStudyParams(
        seed=seed,
        scale=bus_count / 24,
        pile_count=max(1, int(round(10 * bus_count / 24))),
        interval_minutes=interval_minutes,
        other_loads_peak_kw=300.0 * bus_count / 24,
        ess_capacity_kwh=800.0 * bus_count / 24,
        ess_max_charge_kw=1000.0 * bus_count / 24,
        ess_max_discharge_kw=1000.0 * bus_count / 24,
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read a scenario JSON file (``pydantic.ValidationError`` on bad content)."""
    return Scenario.model_validate_json(Path(path).read_text())


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(scenario.model_dump_json(indent=2))


def scenario_schema() -> dict:
    return Scenario.model_json_schema()
