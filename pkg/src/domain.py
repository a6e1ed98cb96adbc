"""Typed station, fleet, tariff and schedule data.

Every type is a frozen pydantic model: instances are immutable after
validation and safe to share between threads and worker processes. Interval
indices are 0-based; a window covers intervals ``0 .. interval_count - 1``.
"""

import hashlib
from decimal import Decimal
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

MINUTES_PER_WEEK = 7 * 24 * 60
MINUTES_PER_DAY = 24 * 60


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class TimeGrid(_Frozen):
    """Optimisation horizon split into equal intervals."""

    interval_count: int = Field(..., ge=1, description="card(K)")
    interval_minutes: float = Field(..., gt=0, description="Δt in minutes")
    start_clock: float = Field(0.0, ge=0, lt=MINUTES_PER_DAY, description="Clock of interval 0")

    @model_validator(mode="after")
    def _at_most_one_week(self) -> "TimeGrid":
        if self.interval_count * self.interval_minutes > MINUTES_PER_WEEK + 1e-9:
            raise ValueError("window longer than one week")
        return self

    @property
    def interval_hours(self) -> float:
        return self.interval_minutes / 60.0

    @property
    def total_minutes(self) -> float:
        return self.interval_count * self.interval_minutes

    def clock_of(self, k: int) -> float:
        """Minutes since midnight at the start of interval ``k``."""
        return (self.start_clock + k * self.interval_minutes) % MINUTES_PER_DAY


class TariffSchedule(_Frozen):
    """Time-of-use purchase price per interval (money per kWh)."""

    price_per_interval: Tuple[float, ...]

    @field_validator("price_per_interval")
    @classmethod
    def _nonnegative(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(p < 0 for p in v):
            raise ValueError("prices must be nonnegative")
        return v


class CostParams(_Frozen):
    """Economic constants of the station and its storage."""

    ess_unit_price: float = Field(
        ...,
        ge=0,
        description=(
            "π^ESS, money per kWh of storage. Real stations price storage above zero; "
            "zero is accepted so sweeps and tests can switch the storage cost off"
        ),
    )
    capacity_charge: float = Field(
        ...,
        ge=0,
        description=(
            "π^Cap, money per kW of peak. Real tariffs charge above zero; "
            "zero is accepted so sweeps and tests can switch the capacity charge off"
        ),
    )
    ess_cycle_count: int = Field(..., ge=1, description="n^ESS")
    discount_rate: float = Field(..., gt=0, lt=1, description="α")
    station_life_years: int = Field(..., ge=1, description="γ")


class FleetSpec(_Frozen):
    """Bus batteries and the fleet-wide fast-charging rating."""

    battery_capacity_kwh: Tuple[float, ...]
    rated_charge_power_kw: float = Field(..., gt=0)
    charge_efficiency: float = Field(..., gt=0, le=1)
    soc_min: float = Field(..., ge=0, lt=1)
    bus_count: int = Field(..., ge=0)

    @model_validator(mode="after")
    def _consistent(self) -> "FleetSpec":
        if len(self.battery_capacity_kwh) != self.bus_count:
            raise ValueError("one battery capacity per bus is required")
        if any(s <= 0 for s in self.battery_capacity_kwh):
            raise ValueError("battery capacities must be positive")
        return self

    def energy_per_interval(self, grid: TimeGrid) -> float:
        """kWh stored in a bus battery by one interval on charge."""
        return self.rated_charge_power_kw * self.charge_efficiency * grid.interval_hours


class EssSpec(_Frozen):
    """Stationary storage; ``capacity_kwh == 0`` means the station has none."""

    capacity_kwh: float = Field(..., ge=0)
    max_charge_kw: float = Field(..., ge=0)
    max_discharge_kw: float = Field(..., ge=0)
    charge_eff: float = Field(..., gt=0, le=1)
    discharge_eff: float = Field(..., gt=0, le=1)
    soc_min: float = Field(..., ge=0, lt=1)
    initial_soc: float = Field(..., le=1)

    @model_validator(mode="after")
    def _initial_in_range(self) -> "EssSpec":
        if self.initial_soc < self.soc_min - 1e-12:
            raise ValueError("initial SOC below SOC_min")
        return self

    @property
    def has_storage(self) -> bool:
        return self.capacity_kwh > 0


class StationSpec(_Frozen):
    pile_count: int = Field(..., ge=1)
    other_loads_kw: Tuple[float, ...]

    @field_validator("other_loads_kw")
    @classmethod
    def _nonnegative(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(x < 0 for x in v):
            raise ValueError("other loads must be nonnegative")
        return v


class ParkingEvent(_Frozen):
    """One stay of a bus at the station, followed by a trip.

    ``arrival_soc`` is ``None`` (serialized as ``"forecast"``) when the SOC at
    arrival is not known and must be estimated. ``open_start`` marks a stay
    already in progress at interval 0; ``open_end`` marks a departure after
    the last interval, in which case ``departure_interval`` may exceed the
    window.
    """

    bus_id: int = Field(..., ge=0)
    arrival_interval: int = Field(..., ge=0)
    departure_interval: int
    arrival_soc: Optional[float] = Field(None, ge=0, le=1)
    next_trip_delta_soc: float = Field(..., gt=0, le=1)
    open_start: bool = False
    open_end: bool = False

    @field_validator("arrival_soc", mode="before")
    @classmethod
    def _forecast_marker(cls, v):
        if v == "forecast":
            return None
        return v

    @field_serializer("arrival_soc")
    def _dump_forecast(self, v: Optional[float]):
        return "forecast" if v is None else v

    @model_validator(mode="after")
    def _ordered(self) -> "ParkingEvent":
        # A stay in progress may have only its departure interval left.
        if self.departure_interval < self.arrival_interval or (
            self.departure_interval == self.arrival_interval and not self.open_start
        ):
            raise ValueError(
                f"bus {self.bus_id}: departure {self.departure_interval} "
                f"not after arrival {self.arrival_interval}"
            )
        return self


class Timetable(_Frozen):
    """Parking events of every bus, ordered in time per bus."""

    events: Tuple[ParkingEvent, ...] = ()

    @model_validator(mode="after")
    def _disjoint_per_bus(self) -> "Timetable":
        last: Dict[int, ParkingEvent] = {}
        for ev in self.events:
            prev = last.get(ev.bus_id)
            if prev is not None and ev.arrival_interval <= prev.departure_interval:
                raise ValueError(
                    f"bus {ev.bus_id}: parking at {ev.arrival_interval} overlaps "
                    f"the one departing at {prev.departure_interval}"
                )
            last[ev.bus_id] = ev
        return self

    def for_bus(self, bus_id: int) -> List[ParkingEvent]:
        return [ev for ev in self.events if ev.bus_id == bus_id]


class ChargeSchedule(_Frozen):
    """Per-interval decisions for a window.

    ``peb_on_charge`` is bus x interval, ``pile_state`` is pile x interval,
    ``ess_soc`` has one more entry than there are intervals.
    """

    peb_on_charge: Tuple[Tuple[int, ...], ...]
    pile_state: Tuple[Tuple[int, ...], ...]
    ess_charge_kw: Tuple[float, ...]
    ess_discharge_kw: Tuple[float, ...]
    ess_soc: Tuple[float, ...]

    @model_validator(mode="after")
    def _shapes(self) -> "ChargeSchedule":
        k = len(self.ess_charge_kw)
        if len(self.ess_discharge_kw) != k or len(self.ess_soc) != k + 1:
            raise ValueError("ESS vectors disagree on the interval count")
        for row in self.peb_on_charge + self.pile_state:
            if len(row) != k:
                raise ValueError("charging-state rows must span every interval")
            if any(x not in (0, 1) for x in row):
                raise ValueError("charging states are binary")
        if any(p < 0 for p in self.ess_charge_kw + self.ess_discharge_kw):
            raise ValueError("ESS powers are nonnegative")
        if self.pile_state and self.peb_on_charge:
            on = np.asarray(self.peb_on_charge).sum(axis=0)
            if np.any(on > len(self.pile_state)):
                raise ValueError("more buses on charge than piles")
        return self

    @property
    def interval_count(self) -> int:
        return len(self.ess_charge_kw)

    def peb_matrix(self) -> np.ndarray:
        if not self.peb_on_charge:
            return np.zeros((0, self.interval_count))
        return np.asarray(self.peb_on_charge, dtype=float)

    def on_charge_counts(self) -> np.ndarray:
        return self.peb_matrix().sum(axis=0) if self.peb_on_charge else np.zeros(self.interval_count)

    @classmethod
    def from_arrays(
        cls,
        peb_on_charge: np.ndarray,
        pile_state: np.ndarray,
        ess_charge_kw: np.ndarray,
        ess_discharge_kw: np.ndarray,
        ess_soc: np.ndarray,
    ) -> "ChargeSchedule":
        return cls(
            peb_on_charge=tuple(tuple(int(x) for x in row) for row in np.asarray(peb_on_charge)),
            pile_state=tuple(tuple(int(x) for x in row) for row in np.asarray(pile_state)),
            ess_charge_kw=tuple(float(x) for x in ess_charge_kw),
            ess_discharge_kw=tuple(float(x) for x in ess_discharge_kw),
            ess_soc=tuple(float(x) for x in ess_soc),
        )

    @classmethod
    def idle(cls, bus_count: int, pile_count: int, interval_count: int, ess_soc: float) -> "ChargeSchedule":
        return cls.from_arrays(
            np.zeros((bus_count, interval_count)),
            np.zeros((pile_count, interval_count)),
            np.zeros(interval_count),
            np.zeros(interval_count),
            np.full(interval_count + 1, ess_soc),
        )


class CostBreakdown(_Frozen):
    """Window costs in milli-exact decimals plus their annualized total."""

    epc: Decimal
    essc: Decimal
    ecc: Decimal
    peak_kw: float
    window_total: Decimal
    annualized_total: Decimal
    other_loads_cost: Decimal = Decimal("0")
    includes_other_loads: bool = False

    @model_validator(mode="after")
    def _total_is_sum(self) -> "CostBreakdown":
        if self.window_total != self.epc + self.essc + self.ecc:
            raise ValueError("window_total must equal epc + essc + ecc")
        return self


class Scenario(_Frozen):
    """Everything needed to schedule one station over one window."""

    grid: TimeGrid
    tariff: TariffSchedule
    cost: CostParams
    fleet: FleetSpec
    ess: EssSpec
    station: StationSpec
    timetable: Timetable

    @model_validator(mode="after")
    def _consistent(self) -> "Scenario":
        k = self.grid.interval_count
        if len(self.tariff.price_per_interval) != k:
            raise ValueError("tariff length must equal the interval count")
        if len(self.station.other_loads_kw) != k:
            raise ValueError("other-loads length must equal the interval count")
        for ev in self.timetable.events:
            if ev.bus_id >= self.fleet.bus_count:
                raise ValueError(f"timetable references unknown bus {ev.bus_id}")
            if not ev.open_end and ev.departure_interval > k - 1:
                raise ValueError(
                    f"bus {ev.bus_id}: departure {ev.departure_interval} outside the window "
                    "without the open_end flag"
                )
            if ev.arrival_interval > k - 1:
                raise ValueError(f"bus {ev.bus_id}: arrival {ev.arrival_interval} outside the window")
            if self.fleet.soc_min + ev.next_trip_delta_soc > 1 + 1e-12:
                raise ValueError(
                    f"bus {ev.bus_id}: SOC_min + ΔSOC exceeds 1 for the trip after "
                    f"interval {ev.departure_interval}"
                )
        return self

    def with_ess(self, **changes) -> "Scenario":
        return self.model_copy(update={"ess": self.ess.model_copy(update=changes)})

    def with_cost(self, **changes) -> "Scenario":
        return self.model_copy(update={"cost": self.cost.model_copy(update=changes)})

    def case_fingerprint(self) -> str:
        """Hash of everything except storage sizing and storage price."""
        payload = self.model_dump_json(exclude={"ess": True, "cost": {"ess_unit_price"}})
        return hashlib.sha256(payload.encode()).hexdigest()[:16]
