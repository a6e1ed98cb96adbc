"""Laxity-based charging dispatch without continuity binaries.

The relaxed model (no continuity constraints) gives each parking a target
charging time CT and each interval a guideline count of buses on charge. The
dispatcher then places one contiguous block of CT intervals per parking,
starting the least flexible buses first, and Model C sizes the storage
around the resulting bus load.
"""

import time
from typing import Dict, List, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict

from .domain import ChargeSchedule
from .errors import DispatchInfeasibleError, InfeasibleModelError, ScheduleVerificationError
from .milp import MilpSolver, SolverConfig, SolveStatus, solve_milp
from .models import (
    ModelKind,
    Violation,
    WindowInput,
    WindowParking,
    build_model_a_relaxed,
    build_model_c,
    extract_schedule,
    verify_schedule,
    window_objective,
)
from .piles import pile_matrix

logger = structlog.get_logger()

ParkingKey = Tuple[int, int]


class ShortfallEvent(BaseModel):
    """Energy a parking will not receive because its block was cut short."""

    model_config = ConfigDict(frozen=True)

    bus: int
    parking: int
    interval: int
    undelivered_kwh: float


class DispatchPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    ct: Dict[ParkingKey, int]
    guideline: Tuple[int, ...]
    peb_on_charge: Tuple[Tuple[int, ...], ...]
    shortfalls: Tuple[ShortfallEvent, ...] = ()
    conflicts: Tuple[int, ...] = ()

    def matrix(self) -> np.ndarray:
        return np.asarray(self.peb_on_charge, dtype=int).reshape(len(self.peb_on_charge), len(self.guideline))


class HeuristicResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    schedule: ChargeSchedule
    objective: float
    relaxed_objective: float
    plan: DispatchPlan
    violations: Tuple[Violation, ...] = ()
    wall_seconds: float


def charging_time_targets(relaxed_peb: np.ndarray, win: WindowInput) -> Dict[ParkingKey, int]:
    """CT per (bus, parking): relaxed on-charge intervals strictly inside the stay."""
    relaxed = np.asarray(relaxed_peb)
    targets: Dict[ParkingKey, int] = {}
    for n in range(win.scenario.fleet.bus_count):
        for parking in win.parkings(n):
            span = parking.interior
            targets[n, parking.index] = int(round(relaxed[n, span.start : span.stop].sum())) if len(span) else 0
    return targets


def guideline_counts(relaxed_peb: np.ndarray, pile_count: int) -> np.ndarray:
    """Column sums of the relaxed charging matrix, capped at the pile count."""
    relaxed = np.asarray(relaxed_peb)
    if relaxed.size == 0:
        return np.zeros(relaxed.shape[1] if relaxed.ndim == 2 else 0, dtype=int)
    return np.minimum(np.rint(relaxed.sum(axis=0)).astype(int), pile_count)


def laxity(parking: WindowParking, ct: int, k: int) -> int:
    """Intervals a waiting bus can still idle: l - CT - k.

    ``l`` is the departure, or the window end for a stay that outlasts the
    window; the arrival of a stay already in progress counts as before 0.

    Raises:
        ValueError: unless the bus is parked at ``k`` strictly after arrival
            and strictly before departure
    """
    arrival = parking.interior_first - 1
    departure = parking.interior_last + 1
    if not arrival < k < departure:
        raise ValueError(f"interval {k} outside parking ({arrival}, {departure})")
    return departure - ct - k


def dispatch(
    ct: Dict[ParkingKey, int],
    guideline: np.ndarray,
    win: WindowInput,
    pile_count: int,
) -> DispatchPlan:
    """Place one contiguous block of CT intervals per parking.

    At every interval, waiting buses with zero (or negative) laxity start
    first; then buses with positive laxity start in increasing laxity order
    (ties: larger CT first, then lower bus id) while fewer buses than the
    guideline are on charge. A block only starts if a pile is free for its
    whole span. Negative laxity starts a block cut at departure and records
    a shortfall; a mandatory block without free piles is recorded as a
    conflict at that interval and retried at the next.
    """
    K = win.interval_count
    N = win.scenario.fleet.bus_count
    per_interval = win.scenario.fleet.energy_per_interval(win.scenario.grid)
    peb = np.zeros((N, K), dtype=int)
    occupancy = np.zeros(K, dtype=int)
    shortfalls: List[ShortfallEvent] = []
    conflicts: List[int] = []

    waiting: Dict[ParkingKey, WindowParking] = {}
    for n in range(N):
        boundary = win.boundaries[n]
        for parking in win.parkings(n):
            target = ct.get((n, parking.index), 0)
            in_progress = parking.event.open_start and parking.first == 0
            if target <= 0 or (in_progress and boundary.block_done):
                continue
            if in_progress and boundary.charging_prev:
                # An ongoing block has to continue from the window start.
                length = min(target, len(parking.interior))
                peb[n, :length] = 1
                occupancy[:length] += 1
                if length < target:
                    shortfalls.append(
                        ShortfallEvent(
                            bus=n,
                            parking=parking.index,
                            interval=0,
                            undelivered_kwh=(target - length) * per_interval,
                        )
                    )
                continue
            waiting[n, parking.index] = parking

    def fits(k: int, length: int) -> bool:
        return bool(np.all(occupancy[k : k + length] < pile_count))

    def start(key: ParkingKey, k: int, length: int) -> None:
        n = key[0]
        peb[n, k : k + length] = 1
        occupancy[k : k + length] += 1
        del waiting[key]

    for k in range(K):
        candidates = []
        for key, parking in waiting.items():
            if parking.interior_first <= k <= parking.interior_last:
                candidates.append((laxity(parking, ct[key], k), -ct[key], key[0], key))
        candidates.sort()
        for lx, neg_ct, _, key in candidates:
            if lx > 0:
                continue
            parking = waiting[key]
            length = -neg_ct if lx == 0 else parking.interior_last - k + 1
            if not fits(k, length):
                logger.debug("Mandatory block overflows the piles", bus=key[0], parking=key[1], interval=k)
                conflicts.append(k)
                continue
            if lx < 0:
                missing = (-neg_ct - length) * per_interval
                shortfalls.append(
                    ShortfallEvent(bus=key[0], parking=key[1], interval=k, undelivered_kwh=missing)
                )
                logger.warning(
                    "Charging block truncated at departure",
                    bus=key[0],
                    parking=key[1],
                    undelivered_kwh=round(missing, 3),
                )
            start(key, k, length)
        for lx, neg_ct, _, key in candidates:
            if lx <= 0 or key not in waiting:
                continue
            if occupancy[k] >= guideline[k]:
                break
            if fits(k, -neg_ct):
                start(key, k, -neg_ct)

    for key, parking in waiting.items():
        # Stays that never found free piles.
        conflicts.append(parking.interior_last)
        shortfalls.append(
            ShortfallEvent(
                bus=key[0],
                parking=key[1],
                interval=parking.interior_last,
                undelivered_kwh=ct[key] * per_interval,
            )
        )

    return DispatchPlan(
        ct=dict(ct),
        guideline=tuple(int(g) for g in guideline),
        peb_on_charge=tuple(tuple(int(x) for x in row) for row in peb),
        shortfalls=tuple(shortfalls),
        conflicts=tuple(sorted(set(conflicts))),
    )


def heuristic_strategy(
    win: WindowInput, config: Optional[SolverConfig] = None, solver: Optional[MilpSolver] = None
) -> HeuristicResult:
    """Relaxed solve, dispatch, then Model C for the storage.

    ``solver`` defaults to the built-in branch-and-bound.

    Raises:
        InfeasibleModelError: the relaxed model or Model C has no solution
        DispatchInfeasibleError: mandatory blocks overflow the piles
    """
    solver = solver or solve_milp
    started = time.perf_counter()
    scenario = win.scenario
    M = scenario.station.pile_count

    relaxed_instance, relaxed_map = build_model_a_relaxed(win, interior_only=True)
    relaxed = solver(relaxed_instance, config=config)
    if not relaxed.has_incumbent:
        raise InfeasibleModelError(f"relaxed model has no solution ({relaxed.status.value})")
    x = relaxed.value_array()
    relaxed_peb = np.array(
        [[round(x[relaxed_map["c", n, k]]) for k in range(win.interval_count)] for n in range(scenario.fleet.bus_count)],
        dtype=int,
    ).reshape(scenario.fleet.bus_count, win.interval_count)

    ct = charging_time_targets(relaxed_peb, win)
    plan = dispatch(ct, guideline_counts(relaxed_peb, M), win, M)
    if plan.conflicts:
        raise DispatchInfeasibleError(
            f"mandatory charging overflows the piles at intervals {list(plan.conflicts)}",
            intervals=list(plan.conflicts),
        )

    peb = plan.matrix()
    load = peb.sum(axis=0) * scenario.fleet.rated_charge_power_kw
    ess_instance, ess_map = build_model_c(win, load)
    ess_solution = solver(ess_instance, config=config)
    if ess_solution.status is not SolveStatus.OPTIMAL:
        raise InfeasibleModelError(f"storage model has no solution ({ess_solution.status.value})")
    ess_part = extract_schedule(ess_solution, ess_map, win)

    initial = {n: b.pile for n, b in enumerate(win.boundaries) if b.charging_prev and b.pile is not None and b.pile < M}
    schedule = ChargeSchedule(
        peb_on_charge=plan.peb_on_charge,
        pile_state=tuple(tuple(int(v) for v in row) for row in pile_matrix(peb, M, initial)),
        ess_charge_kw=ess_part.ess_charge_kw,
        ess_discharge_kw=ess_part.ess_discharge_kw,
        ess_soc=ess_part.ess_soc,
    )
    violations = verify_schedule(schedule, win, ModelKind.B)
    if violations and not plan.shortfalls:
        raise ScheduleVerificationError(f"dispatch produced {len(violations)} violations: {violations[0].message}")
    if violations:
        logger.warning("Heuristic schedule misses demand", shortfalls=len(plan.shortfalls), violations=len(violations))

    objective = window_objective(schedule, win)
    elapsed = time.perf_counter() - started
    logger.info(
        "Heuristic strategy solved",
        objective=round(objective, 3),
        relaxed_objective=round(relaxed.objective, 3),
        seconds=round(elapsed, 3),
    )
    return HeuristicResult(
        schedule=schedule,
        objective=objective,
        relaxed_objective=relaxed.objective,
        plan=plan,
        violations=tuple(violations),
        wall_seconds=elapsed,
    )
