"""Assemble Models A, B, C and relaxed A as MILP instances.

Constraint names carry the equation they implement (``eq5[k=3]``,
``eq11lo[n=0,j=2]``) so a dump of the instance reads against the model
statement. Intervals are window-relative and 0-based.
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..costs import capital_recovery_factor, recharge_energy_bounds, window_fraction
from ..errors import DimensionMismatchError, InfeasibleModelError
from ..milp.instance import Constraint, MilpInstance, Sense, Variable, VarKind
from .window import ModelKind, VarMap, WindowInput, WindowParking

logger = structlog.get_logger()


class _Assembler:
    """Accumulates columns, rows and objective terms for one instance."""

    def __init__(self, name: str, varmap: VarMap):
        self.name = name
        self.varmap = varmap
        self.variables: List[Variable] = []
        self.constraints: List[Constraint] = []
        self.objective: Dict[int, float] = {}
        self.constant = 0.0

    def var(self, key: tuple, name: str, lower=0.0, upper=math.inf, kind=VarKind.CONTINUOUS, cost=0.0) -> int:
        index = len(self.variables)
        self.variables.append(Variable(name=name, lower=lower, upper=upper, kind=kind))
        self.varmap.add(key, index)
        if cost:
            self.objective[index] = self.objective.get(index, 0.0) + cost
        return index

    def row(self, name: str, terms: Sequence[Tuple[int, float]], sense: Sense, rhs: float) -> None:
        merged: Dict[int, float] = {}
        for j, coef in terms:
            merged[j] = merged.get(j, 0.0) + coef
        coefficients = tuple((j, c) for j, c in merged.items() if c != 0)
        self.constraints.append(Constraint(name=name, coefficients=coefficients, sense=sense, rhs=float(rhs)))

    def build(self) -> MilpInstance:
        return MilpInstance(
            name=self.name,
            variables=tuple(self.variables),
            constraints=tuple(self.constraints),
            objective=tuple(sorted(self.objective.items())),
            objective_constant=self.constant,
        )


def peak_cost_coefficient(win: WindowInput) -> float:
    """Φ · Γ · π^Cap: ECC per kW of window peak."""
    cost, grid = win.scenario.cost, win.scenario.grid
    return window_fraction(grid) * capital_recovery_factor(cost.discount_rate, cost.station_life_years) * cost.capacity_charge


def demand_bounds(win: WindowInput, bus: int) -> List[Tuple[WindowParking, float, float, int]]:
    """Cumulative (parking, min kWh, max kWh, chain start) per parking in the window.

    Each chain starts at the latest parking whose arrival SOC is known;
    energy already delivered during an open parking is deducted. Parkings
    that depart after the window carry only the upper bound (min is 0.0).
    """
    fleet = win.scenario.fleet
    parkings = win.parkings(bus)
    if not parkings:
        return []
    if parkings[0].event.arrival_soc is None:
        raise InfeasibleModelError(
            f"bus {bus}: arrival SOC of the first parking in the window is unknown", bus=bus, parking=0
        )
    result = []
    anchor = 0
    for j, parking in enumerate(parkings):
        if parking.event.arrival_soc is not None:
            anchor = j
        chain = [p.event for p in parkings[anchor : j + 1]]
        delivered = win.boundaries[bus].delivered_kwh if anchor == 0 and parkings[0].event.open_start else 0.0
        low, high = recharge_energy_bounds(chain, fleet, j - anchor, delivered_kwh=delivered)
        if parking.event.open_end:
            low = 0.0
        result.append((parking, low, high, anchor))
    return result


def _check_deliverable(win: WindowInput, bus: int, bounds, per_interval_kwh: float, interior_only: bool) -> None:
    chargeable = win.chargeable(bus, interior_only=interior_only)
    for parking, low, _, anchor in bounds:
        if low <= 0:
            continue
        capacity = per_interval_kwh * sum(
            1 for k, p in chargeable.items() if anchor <= p.index <= parking.index
        )
        if low > capacity + 1e-6:
            logger.warning(
                "Parking too short for its minimum recharge",
                bus=bus,
                parking=parking.index,
                required_kwh=round(low, 3),
                deliverable_kwh=round(capacity, 3),
            )
            raise InfeasibleModelError(
                f"bus {bus}, parking {parking.index}: needs {low:.3f} kWh but at most "
                f"{capacity:.3f} kWh can be delivered",
                bus=bus,
                parking=parking.index,
            )


def _add_peb_part(asm: _Assembler, win: WindowInput, continuity: bool, interior_only: bool) -> Dict[Tuple[int, int], int]:
    """Columns c (and u, v) with the pile, parking, continuity, block and demand rows.

    Returns the c column ids.
    """
    scenario = win.scenario
    fleet, grid, tariff = scenario.fleet, scenario.grid, scenario.tariff
    K, N = grid.interval_count, fleet.bus_count
    dt_h = grid.interval_hours
    per_interval = fleet.energy_per_interval(grid)
    c: Dict[Tuple[int, int], int] = {}

    for n in range(N):
        chargeable = win.chargeable(n, interior_only=interior_only)
        for k in range(K):
            # No charging outside the bus's parkings.
            c[n, k] = asm.var(
                ("c", n, k),
                f"c[{n},{k}]",
                upper=1.0 if k in chargeable else 0.0,
                kind=VarKind.BINARY,
                cost=fleet.rated_charge_power_kw * dt_h * tariff.price_per_interval[k],
            )

    u: Dict[Tuple[int, int], int] = {}
    v: Dict[Tuple[int, int], int] = {}
    if continuity:
        for n in range(N):
            parked = win.chargeable(n)
            for k in range(1, K):
                u[n, k] = asm.var(("u", n, k), f"u[{n},{k}]", upper=1.0 if k in parked else 0.0, kind=VarKind.BINARY)
            for k in range(K - 1):
                v[n, k] = asm.var(("v", n, k), f"v[{n},{k}]", upper=1.0 if k in parked else 0.0, kind=VarKind.BINARY)

    # Pile count.
    for k in range(K):
        asm.row(f"eq5[k={k}]", [(c[n, k], 1.0) for n in range(N)], Sense.LE, scenario.station.pile_count)

    for n in range(N):
        boundary = win.boundaries[n]
        parkings = win.parkings(n)
        if continuity:
            parked = win.chargeable(n)
            for k in range(1, K):
                if k in parked:
                    asm.row(f"eq7[n={n},k={k}]", [(u[n, k], 1.0), (c[n, k], -1.0), (c[n, k - 1], 1.0)], Sense.GE, 0.0)
            for k in range(K - 1):
                if k in parked:
                    asm.row(f"eq8[n={n},k={k}]", [(v[n, k], 1.0), (c[n, k], -1.0), (c[n, k + 1], 1.0)], Sense.GE, 0.0)
            for parking in parkings:
                in_progress = parking.event.open_start and parking.first == 0
                if in_progress and boundary.block_done:
                    continue
                starts = [(u[n, k], 1.0) for k in parking.intervals if k >= 1]
                stops = [(v[n, k], 1.0) for k in parking.intervals if k <= K - 2]
                start_const = 0.0
                if parking.first == 0:
                    if in_progress and boundary.charging_prev:
                        # Block already started; a stop right at the boundary is 1 - c0.
                        start_const = 1.0
                        stops.append((c[n, 0], -1.0))
                        stop_const = 1.0
                    else:
                        starts.append((c[n, 0], 1.0))
                        stop_const = 0.0
                else:
                    stop_const = 0.0
                if parking.last == K - 1:
                    stops.append((c[n, K - 1], 1.0))
                balance = starts + [(j, -coef) for j, coef in stops]
                asm.row(f"eq10[n={n},i={parking.index}]", balance, Sense.EQ, stop_const - start_const)
                asm.row(f"eq10max[n={n},i={parking.index}]", starts, Sense.LE, 1.0 - start_const)

        bounds = demand_bounds(win, n)
        _check_deliverable(win, n, bounds, per_interval, interior_only)
        chargeable = win.chargeable(n, interior_only=interior_only)
        for parking, low, high, anchor in bounds:
            terms = [
                (c[n, k], per_interval) for k, p in chargeable.items() if anchor <= p.index <= parking.index
            ]
            if not terms:
                continue
            tag = f"n={n},j={parking.index}"
            if low > 0:
                asm.row(f"eq11lo[{tag}]", terms, Sense.GE, low)
            asm.row(f"eq11hi[{tag}]", terms, Sense.LE, high)
    return c


def _add_ess_part(asm: _Assembler, win: WindowInput) -> Tuple[Dict[int, int], Dict[int, int]]:
    """Columns pc, pd, soc with the power, SOC and energy-balance rows."""
    scenario = win.scenario
    ess, cost, grid, tariff = scenario.ess, scenario.cost, scenario.grid, scenario.tariff
    K, dt_h = grid.interval_count, grid.interval_hours
    usable = ess.has_storage
    wear = cost.ess_unit_price / cost.ess_cycle_count * ess.charge_eff * dt_h
    pc: Dict[int, int] = {}
    pd: Dict[int, int] = {}
    soc: Dict[int, int] = {}
    for k in range(K):
        price = tariff.price_per_interval[k]
        # Power ratings as bounds.
        pc[k] = asm.var(("pc", k), f"pc[{k}]", upper=ess.max_charge_kw if usable else 0.0, cost=dt_h * price + wear)
        pd[k] = asm.var(("pd", k), f"pd[{k}]", upper=ess.max_discharge_kw if usable else 0.0, cost=-dt_h * price)
    for k in range(K + 1):
        # SOC range as bounds; SOC at the window start is fixed.
        if k == 0 or not usable:
            lower = upper = win.ess_soc
        else:
            lower, upper = ess.soc_min, 1.0
        soc[k] = asm.var(("soc", k), f"soc[{k}]", lower=lower, upper=upper)
    if not usable:
        return pc, pd

    gain = ess.charge_eff * dt_h / ess.capacity_kwh
    drain = dt_h / (ess.discharge_eff * ess.capacity_kwh)
    for k in range(K):
        asm.row(
            f"eq21[k={k}]",
            [(soc[k + 1], 1.0), (soc[k], -1.0), (pc[k], -gain), (pd[k], drain)],
            Sense.EQ,
            0.0,
        )
    asm.row(
        "eq24",
        [(pc[k], ess.charge_eff * dt_h) for k in range(K)] + [(pd[k], -dt_h / ess.discharge_eff) for k in range(K)],
        Sense.EQ,
        0.0,
    )
    return pc, pd


def _add_peak(
    asm: _Assembler,
    win: WindowInput,
    c: Optional[Dict[Tuple[int, int], int]],
    ess: Optional[Tuple[Dict[int, int], Dict[int, int]]],
    fixed_load: Optional[np.ndarray] = None,
) -> None:
    """Peak above every interval's station load."""
    scenario = win.scenario
    K, N = scenario.grid.interval_count, scenario.fleet.bus_count
    power = scenario.fleet.rated_charge_power_kw
    peak = asm.var(("peak",), "peak", lower=win.peak_floor_kw, cost=peak_cost_coefficient(win))
    tag = "eq18" if ess is not None else "eq4"
    for k in range(K):
        terms = [(peak, 1.0)]
        if c is not None:
            terms += [(c[n, k], -power) for n in range(N)]
        if ess is not None:
            terms += [(ess[0][k], -1.0), (ess[1][k], 1.0)]
        rhs = scenario.station.other_loads_kw[k]
        if fixed_load is not None:
            rhs += float(fixed_load[k])
        asm.row(f"{tag}[k={k}]", terms, Sense.GE, rhs)


def build_model_a(win: WindowInput) -> Tuple[MilpInstance, VarMap]:
    """Coordinated bus charging without storage: min EPC + ECC."""
    varmap = VarMap(ModelKind.A)
    asm = _Assembler("model_a", varmap)
    c = _add_peb_part(asm, win, continuity=True, interior_only=False)
    _add_peak(asm, win, c, None)
    instance = asm.build()
    logger.debug("Built model", model="A", variables=instance.variable_count, constraints=len(instance.constraints))
    return instance, varmap


def build_model_b(win: WindowInput) -> Tuple[MilpInstance, VarMap]:
    """Coordinated bus charging with storage: min EPC + ESSC + ECC.

    A station without storage (capacity 0) keeps the storage columns but
    fixes them to zero, so the optimum equals Model A's.
    """
    varmap = VarMap(ModelKind.B)
    asm = _Assembler("model_b", varmap)
    c = _add_peb_part(asm, win, continuity=True, interior_only=False)
    ess = _add_ess_part(asm, win)
    _add_peak(asm, win, c, ess)
    instance = asm.build()
    logger.debug("Built model", model="B", variables=instance.variable_count, constraints=len(instance.constraints))
    return instance, varmap


def build_model_c(win: WindowInput, fixed_peb_load_kw: Sequence[float]) -> Tuple[MilpInstance, VarMap]:
    """Storage only, with the bus charging profile given as data (pure LP)."""
    scenario = win.scenario
    K = scenario.grid.interval_count
    load = np.asarray(fixed_peb_load_kw, dtype=float)
    if load.shape != (K,):
        raise DimensionMismatchError(f"fixed bus load has {load.size} entries, expected {K}")
    if np.any(load < 0):
        raise DimensionMismatchError("fixed bus load must be nonnegative")
    varmap = VarMap(ModelKind.C, fixed_peb_load_kw=tuple(float(x) for x in load))
    asm = _Assembler("model_c", varmap)
    asm.constant = float(np.sum(load * np.asarray(scenario.tariff.price_per_interval)) * scenario.grid.interval_hours)
    ess = _add_ess_part(asm, win)
    _add_peak(asm, win, None, ess, fixed_load=load)
    return asm.build(), varmap


def build_model_a_relaxed(win: WindowInput, interior_only: bool = False) -> Tuple[MilpInstance, VarMap]:
    """Model A without the continuity and single-block rows.

    ``interior_only`` additionally keeps charging off the exact arrival and
    departure intervals, matching the charging-time count the dispatcher uses.
    """
    varmap = VarMap(ModelKind.RELAXED_A)
    asm = _Assembler("model_a_relaxed", varmap)
    c = _add_peb_part(asm, win, continuity=False, interior_only=interior_only)
    _add_peak(asm, win, c, None)
    return asm.build(), varmap
