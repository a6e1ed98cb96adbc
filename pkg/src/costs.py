"""Cost formulas, peak computation and per-bus recharge bounds.

All energy arithmetic is in kWh and hours; the interval length is converted
from minutes exactly once, through ``TimeGrid.interval_hours``.
"""

from decimal import ROUND_HALF_EVEN, Decimal
from typing import Optional, Sequence, Tuple

import numpy as np

from .domain import (
    ChargeSchedule,
    CostBreakdown,
    CostParams,
    EssSpec,
    FleetSpec,
    ParkingEvent,
    StationSpec,
    TariffSchedule,
    TimeGrid,
)
from .errors import DimensionMismatchError, DomainError, InfeasibleBoundsError

MINUTES_PER_YEAR = 365 * 24 * 60
_MILLI = Decimal("0.001")


def money(value: float) -> Decimal:
    """Round a float amount to exact milli-units."""
    return Decimal(repr(float(value))).quantize(_MILLI, rounding=ROUND_HALF_EVEN)


def capital_recovery_factor(alpha: float, gamma: int) -> float:
    """Γ = α(1+α)^γ / ((1+α)^γ − 1)."""
    if not 0 < alpha < 1:
        raise DomainError(f"discount rate must lie in (0, 1), got {alpha}")
    if gamma < 1:
        raise DomainError(f"station life must be at least one year, got {gamma}")
    growth = (1 + alpha) ** gamma
    return alpha * growth / (growth - 1)


def window_fraction(grid: TimeGrid) -> float:
    """Φ: share of a year covered by the window."""
    return grid.interval_count * grid.interval_minutes / MINUTES_PER_YEAR


def annualization_factor(grid: TimeGrid) -> float:
    return 1.0 / window_fraction(grid)


def _check_length(name: str, values: Sequence, expected: int) -> None:
    if len(values) != expected:
        raise DimensionMismatchError(f"{name} has {len(values)} entries, expected {expected}")


def purchase_cost_from_profiles(
    peb_kw: np.ndarray,
    ess_charge_kw: np.ndarray,
    ess_discharge_kw: np.ndarray,
    prices: np.ndarray,
    interval_hours: float,
) -> float:
    net = np.asarray(peb_kw) + np.asarray(ess_charge_kw) - np.asarray(ess_discharge_kw)
    return float(np.sum(net * interval_hours * np.asarray(prices)))


def electricity_purchase_cost(
    schedule: ChargeSchedule, fleet: FleetSpec, tariff: TariffSchedule, grid: TimeGrid
) -> float:
    """EPC of bus charging plus net storage exchange over the window."""
    k = grid.interval_count
    _check_length("schedule", schedule.ess_charge_kw, k)
    _check_length("tariff", tariff.price_per_interval, k)
    if len(schedule.peb_on_charge) not in (0, fleet.bus_count):
        raise DimensionMismatchError(
            f"schedule has {len(schedule.peb_on_charge)} buses, fleet has {fleet.bus_count}"
        )
    peb_kw = schedule.on_charge_counts() * fleet.rated_charge_power_kw
    return purchase_cost_from_profiles(
        peb_kw,
        np.asarray(schedule.ess_charge_kw),
        np.asarray(schedule.ess_discharge_kw),
        np.asarray(tariff.price_per_interval),
        grid.interval_hours,
    )


def other_load_cost(station: StationSpec, tariff: TariffSchedule, grid: TimeGrid) -> float:
    """Purchase cost of the non-bus loads, a constant for every schedule."""
    _check_length("other loads", station.other_loads_kw, grid.interval_count)
    return float(
        np.sum(np.asarray(station.other_loads_kw) * np.asarray(tariff.price_per_interval))
        * grid.interval_hours
    )


def ess_life_cost(schedule: ChargeSchedule, ess: EssSpec, cost: CostParams, grid: TimeGrid) -> float:
    """ESSC: storage wear priced on charged throughput."""
    _check_length("schedule", schedule.ess_charge_kw, grid.interval_count)
    throughput = float(np.sum(schedule.ess_charge_kw)) * ess.charge_eff * grid.interval_hours
    return cost.ess_unit_price / cost.ess_cycle_count * throughput


def load_profile(schedule: ChargeSchedule, fleet: FleetSpec, station: StationSpec) -> np.ndarray:
    """Station draw per interval: buses + net storage charging + other loads."""
    _check_length("other loads", station.other_loads_kw, schedule.interval_count)
    return (
        schedule.on_charge_counts() * fleet.rated_charge_power_kw
        + np.asarray(schedule.ess_charge_kw)
        - np.asarray(schedule.ess_discharge_kw)
        + np.asarray(station.other_loads_kw)
    )


def peak_load(schedule: ChargeSchedule, fleet: FleetSpec, station: StationSpec) -> float:
    return float(np.max(load_profile(schedule, fleet, station)))


def equivalent_capacity_charge(peak_kw: float, cost: CostParams, grid: TimeGrid) -> float:
    """ECC = Φ · Γ · P_peak · π^Cap."""
    if peak_kw < 0:
        raise DomainError(f"peak must be nonnegative, got {peak_kw}")
    gamma = capital_recovery_factor(cost.discount_rate, cost.station_life_years)
    return window_fraction(grid) * gamma * peak_kw * cost.capacity_charge


def recharge_energy_bounds(
    events: Sequence[ParkingEvent],
    fleet: FleetSpec,
    up_to_parking: int,
    delivered_kwh: float = 0.0,
) -> Tuple[float, float]:
    """Cumulative (min, max) stored energy from ``events[0]`` through ``events[up_to_parking]``.

    The SOC at the first event must be known. ``delivered_kwh`` is energy
    already stored during the first event and is subtracted from both bounds.
    A negative lower bound means no charging is required and is clamped to 0.
    """
    if not events:
        raise DomainError("no parking events given")
    if not 0 <= up_to_parking < len(events):
        raise DomainError(f"parking index {up_to_parking} outside 0..{len(events) - 1}")
    first = events[0]
    if first.arrival_soc is None:
        raise DomainError(f"bus {first.bus_id}: SOC at the first parking is not known")
    capacity = fleet.battery_capacity_kwh[first.bus_id]
    trips = [ev.next_trip_delta_soc for ev in events[: up_to_parking + 1]]
    for delta in trips:
        if fleet.soc_min + delta > 1 + 1e-12:
            raise InfeasibleBoundsError(f"bus {first.bus_id}: SOC_min + ΔSOC exceeds 1")
    lower = (sum(trips) - first.arrival_soc + fleet.soc_min) * capacity - delivered_kwh
    upper = (sum(trips[:-1]) + 1 - first.arrival_soc) * capacity - delivered_kwh
    lower = max(0.0, lower)
    if lower > upper + 1e-9:
        raise InfeasibleBoundsError(
            f"bus {first.bus_id}: minimum recharge {lower:.3f} kWh exceeds maximum {upper:.3f} kWh"
        )
    return lower, upper


def cost_breakdown(
    schedule: ChargeSchedule,
    fleet: FleetSpec,
    ess: EssSpec,
    station: StationSpec,
    tariff: TariffSchedule,
    cost: CostParams,
    grid: TimeGrid,
    include_other_loads: bool = True,
    peak_floor_kw: float = 0.0,
) -> CostBreakdown:
    """Evaluate EPC, ESSC and ECC of a schedule and annualize their sum."""
    other = other_load_cost(station, tariff, grid)
    epc = electricity_purchase_cost(schedule, fleet, tariff, grid)
    if include_other_loads:
        epc += other
    peak = max(peak_floor_kw, peak_load(schedule, fleet, station))
    return breakdown_from_components(
        epc,
        ess_life_cost(schedule, ess, cost, grid),
        equivalent_capacity_charge(peak, cost, grid),
        peak,
        grid,
        other_loads=other,
        includes_other_loads=include_other_loads,
    )


def breakdown_from_components(
    epc: float,
    essc: float,
    ecc: float,
    peak_kw: float,
    grid: TimeGrid,
    other_loads: float = 0.0,
    includes_other_loads: bool = False,
    annualize_over: Optional[TimeGrid] = None,
) -> CostBreakdown:
    epc_m, essc_m, ecc_m = money(epc), money(essc), money(ecc)
    total = epc_m + essc_m + ecc_m
    span = annualize_over or grid
    factor = Decimal(MINUTES_PER_YEAR) / (
        Decimal(span.interval_count) * Decimal(repr(span.interval_minutes))
    )
    return CostBreakdown(
        epc=epc_m,
        essc=essc_m,
        ecc=ecc_m,
        peak_kw=peak_kw,
        window_total=total,
        annualized_total=(total * factor).quantize(_MILLI, rounding=ROUND_HALF_EVEN),
        other_loads_cost=money(other_loads),
        includes_other_loads=includes_other_loads,
    )
