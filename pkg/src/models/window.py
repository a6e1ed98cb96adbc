"""Optimisation window: scenario plus boundary state, and the variable map."""

from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..domain import ParkingEvent, Scenario


class ModelKind(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    RELAXED_A = "relaxed_A"


class BusBoundary(BaseModel):
    """State of one bus at the start of the window.

    ``charging_prev`` is c at the interval just before the window; the bus is
    then mid-block and its block may continue or stop but not restart.
    ``block_done`` marks a block that already ended in the current parking.
    ``delivered_kwh`` is energy already stored during the current parking.
    """

    model_config = ConfigDict(frozen=True)

    charging_prev: bool = False
    block_done: bool = False
    delivered_kwh: float = Field(0.0, ge=0)
    pile: Optional[int] = Field(None, ge=0)


class WindowParking(BaseModel):
    """A parking clipped to the window, with its chargeable interval ranges."""

    model_config = ConfigDict(frozen=True)

    index: int
    event: ParkingEvent
    first: int
    last: int
    interior_first: int
    interior_last: int

    @property
    def intervals(self) -> range:
        return range(self.first, self.last + 1)

    @property
    def interior(self) -> range:
        return range(self.interior_first, self.interior_last + 1)

    def contains(self, k: int) -> bool:
        return self.first <= k <= self.last


class WindowInput(BaseModel):
    """Scenario data in window-relative intervals plus boundary conditions."""

    model_config = ConfigDict(frozen=True)

    scenario: Scenario
    boundaries: Tuple[BusBoundary, ...]
    ess_soc: float = Field(..., ge=0, le=1)
    peak_floor_kw: float = Field(0.0, ge=0)
    # False when buses reach the depot during the arrival interval and can only
    # plug in from the next one.
    arrival_chargeable: bool = True

    @model_validator(mode="after")
    def _consistent(self) -> "WindowInput":
        fleet, ess = self.scenario.fleet, self.scenario.ess
        if len(self.boundaries) != fleet.bus_count:
            raise ValueError("one boundary state per bus is required")
        if ess.has_storage and self.ess_soc < ess.soc_min - 1e-9:
            raise ValueError(f"ESS SOC {self.ess_soc} below SOC_min {ess.soc_min}")
        for n, boundary in enumerate(self.boundaries):
            current = self.current_parking(n)
            if (boundary.charging_prev or boundary.block_done or boundary.delivered_kwh) and current is None:
                raise ValueError(f"bus {n}: boundary charging state without a parking in progress")
            if boundary.charging_prev and boundary.block_done:
                raise ValueError(f"bus {n}: a block cannot be both ongoing and finished")
        return self

    @classmethod
    def from_scenario(cls, scenario: Scenario, peak_floor_kw: float = 0.0) -> "WindowInput":
        """Window over a whole scenario with no charging in progress."""
        return cls(
            scenario=scenario,
            boundaries=tuple(BusBoundary() for _ in range(scenario.fleet.bus_count)),
            ess_soc=scenario.ess.initial_soc,
            peak_floor_kw=peak_floor_kw,
        )

    @property
    def interval_count(self) -> int:
        return self.scenario.grid.interval_count

    def parkings(self, bus: int) -> List[WindowParking]:
        k_last = self.interval_count - 1
        result = []
        for index, ev in enumerate(self.scenario.timetable.for_bus(bus)):
            plug_in_at_arrival = ev.open_start or self.arrival_chargeable
            last = min(ev.departure_interval, k_last)
            interior_first = ev.arrival_interval if ev.open_start else ev.arrival_interval + 1
            interior_last = k_last if ev.departure_interval > k_last else ev.departure_interval - 1
            result.append(
                WindowParking(
                    index=index,
                    event=ev,
                    first=ev.arrival_interval if plug_in_at_arrival else ev.arrival_interval + 1,
                    last=last,
                    interior_first=interior_first,
                    interior_last=interior_last,
                )
            )
        return result

    def current_parking(self, bus: int) -> Optional[WindowParking]:
        """The parking in progress at interval 0 (flagged ``open_start``)."""
        for parking in self.parkings(bus):
            if parking.event.open_start and parking.first == 0:
                return parking
        return None

    def chargeable(self, bus: int, interior_only: bool = False) -> Dict[int, WindowParking]:
        """Interval -> parking for every interval where the bus may charge."""
        boundary = self.boundaries[bus]
        result: Dict[int, WindowParking] = {}
        for parking in self.parkings(bus):
            if boundary.block_done and parking.event.open_start and parking.first == 0:
                continue
            span = parking.interior if interior_only else parking.intervals
            for k in span:
                result[k] = parking
        return result


class VarMap:
    """Semantic keys to MILP column ids.

    Keys: ``("c", n, k)``, ``("u", n, k)``, ``("v", n, k)``, ``("pc", k)``,
    ``("pd", k)``, ``("soc", k)`` and ``("peak",)``.
    """

    def __init__(self, model: ModelKind, fixed_peb_load_kw: Optional[Tuple[float, ...]] = None):
        self.model = model
        self.fixed_peb_load_kw = fixed_peb_load_kw
        self._ids: Dict[tuple, int] = {}

    def add(self, key: tuple, index: int) -> None:
        if key in self._ids:
            raise KeyError(f"duplicate variable key {key}")
        self._ids[key] = index

    def __getitem__(self, key: tuple) -> int:
        return self._ids[key]

    def __contains__(self, key: tuple) -> bool:
        return key in self._ids

    def __len__(self) -> int:
        return len(self._ids)

    def keys(self):
        return self._ids.keys()

    def get(self, key: tuple, default=None):
        return self._ids.get(key, default)

    @property
    def has_peb(self) -> bool:
        return any(key[0] == "c" for key in self._ids)

    @property
    def has_ess(self) -> bool:
        return ("pc", 0) in self._ids
