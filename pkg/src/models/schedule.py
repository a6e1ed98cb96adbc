"""Turn solver output into schedules and re-check schedules against the models."""

from typing import Dict, List, Optional, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict

from ..costs import breakdown_from_components, equivalent_capacity_charge, ess_life_cost, purchase_cost_from_profiles
from ..domain import ChargeSchedule, CostBreakdown
from ..errors import PebfcsError, ScheduleVerificationError
from ..milp.instance import MilpSolution
from ..piles import pile_matrix
from .builders import demand_bounds
from .window import ModelKind, VarMap, WindowInput

logger = structlog.get_logger()

TOLERANCE = 1e-6


class Violation(BaseModel):
    """One broken constraint: equation tag, indices and a readable message."""

    model_config = ConfigDict(frozen=True)

    equation: str
    indices: Dict[str, int] = {}
    message: str


def peb_load_kw(schedule: ChargeSchedule, win: WindowInput, fixed_peb_load_kw: Optional[Sequence[float]] = None) -> np.ndarray:
    if fixed_peb_load_kw is not None:
        return np.asarray(fixed_peb_load_kw, dtype=float)
    return schedule.on_charge_counts() * win.scenario.fleet.rated_charge_power_kw


def station_load_kw(schedule: ChargeSchedule, win: WindowInput, fixed_peb_load_kw: Optional[Sequence[float]] = None) -> np.ndarray:
    """Bus charging + net storage charging + other loads, per interval."""
    return (
        peb_load_kw(schedule, win, fixed_peb_load_kw)
        + np.asarray(schedule.ess_charge_kw)
        - np.asarray(schedule.ess_discharge_kw)
        + np.asarray(win.scenario.station.other_loads_kw)
    )


def window_costs(
    schedule: ChargeSchedule, win: WindowInput, fixed_peb_load_kw: Optional[Sequence[float]] = None
) -> CostBreakdown:
    """EPC, ESSC and ECC of a schedule as the window objective counts them.

    Other-load purchases are left out of EPC; other loads still count toward
    the peak, which is floored at ``win.peak_floor_kw``.
    """
    epc, essc, ecc, peak = _components(schedule, win, fixed_peb_load_kw)
    return breakdown_from_components(epc, essc, ecc, peak, win.scenario.grid)


def window_objective(
    schedule: ChargeSchedule, win: WindowInput, fixed_peb_load_kw: Optional[Sequence[float]] = None
) -> float:
    epc, essc, ecc, _ = _components(schedule, win, fixed_peb_load_kw)
    return epc + essc + ecc


def _components(schedule, win, fixed_peb_load_kw):
    scenario = win.scenario
    grid = scenario.grid
    epc = purchase_cost_from_profiles(
        peb_load_kw(schedule, win, fixed_peb_load_kw),
        np.asarray(schedule.ess_charge_kw),
        np.asarray(schedule.ess_discharge_kw),
        np.asarray(scenario.tariff.price_per_interval),
        grid.interval_hours,
    )
    essc = ess_life_cost(schedule, scenario.ess, scenario.cost, grid)
    peak = max(win.peak_floor_kw, float(np.max(station_load_kw(schedule, win, fixed_peb_load_kw))))
    ecc = equivalent_capacity_charge(max(peak, 0.0), scenario.cost, grid)
    return epc, essc, ecc, peak


def ess_soc_trajectory(charge_kw: np.ndarray, discharge_kw: np.ndarray, win: WindowInput) -> np.ndarray:
    """Forward SOC recurrence, normalised by the storage capacity."""
    ess, dt_h = win.scenario.ess, win.scenario.grid.interval_hours
    soc = np.full(len(charge_kw) + 1, win.ess_soc)
    if not ess.has_storage:
        return soc
    step = (charge_kw * ess.charge_eff - discharge_kw / ess.discharge_eff) * dt_h / ess.capacity_kwh
    soc[1:] = win.ess_soc + np.cumsum(step)
    return soc


def remove_simultaneous_exchange(charge_kw: np.ndarray, discharge_kw: np.ndarray, charge_eff: float, discharge_eff: float):
    """Cancel overlapping charge and discharge without moving the SOC path.

    Where both powers are positive, charge drops by ``min(pc, pd/(ηc·ηd))``
    and discharge by ``ηc·ηd`` times that, which leaves one of them at zero
    and lowers net grid import.
    """
    pc, pd = charge_kw.copy(), discharge_kw.copy()
    both = (pc > 0) & (pd > 0)
    round_trip = charge_eff * discharge_eff
    delta = np.minimum(pc[both], pd[both] / round_trip)
    pc[both] -= delta
    pd[both] -= delta * round_trip
    pc[both & (pc < 1e-9)] = 0.0
    pd[both & (pd < 1e-9)] = 0.0
    return pc, pd


def extract_schedule(solution: MilpSolution, varmap: VarMap, win: WindowInput) -> ChargeSchedule:
    """Build a ChargeSchedule from a solved instance.

    Binaries are snapped, piles assigned, storage overlap cancelled and the
    storage SOC path recomputed. The cleaned schedule is re-verified.

    Raises:
        ScheduleVerificationError: when the cleaned schedule breaks a model
            constraint or costs more than the raw solution
    """
    if not solution.has_incumbent:
        raise ScheduleVerificationError(f"no incumbent to extract (status {solution.status.value})")
    scenario = win.scenario
    K, N, M = scenario.grid.interval_count, scenario.fleet.bus_count, scenario.station.pile_count
    x = solution.value_array()

    if varmap.has_peb:
        peb = np.zeros((N, K), dtype=int)
        for n in range(N):
            for k in range(K):
                peb[n, k] = int(round(x[varmap["c", n, k]]))
        initial = {n: b.pile for n, b in enumerate(win.boundaries) if b.charging_prev and b.pile is not None and b.pile < M}
        piles = pile_matrix(peb, M, initial)
    else:
        peb = np.zeros((0, K), dtype=int)
        piles = np.zeros((0, K), dtype=int)

    if varmap.has_ess:
        raw_pc = np.clip([x[varmap["pc", k]] for k in range(K)], 0.0, None)
        raw_pd = np.clip([x[varmap["pd", k]] for k in range(K)], 0.0, None)
    else:
        raw_pc, raw_pd = np.zeros(K), np.zeros(K)
    ess = scenario.ess
    pc, pd = remove_simultaneous_exchange(raw_pc, raw_pd, ess.charge_eff, ess.discharge_eff)

    raw = ChargeSchedule.from_arrays(peb, piles, raw_pc, raw_pd, ess_soc_trajectory(raw_pc, raw_pd, win))
    cleaned = ChargeSchedule.from_arrays(peb, piles, pc, pd, ess_soc_trajectory(pc, pd, win))

    fixed = varmap.fixed_peb_load_kw
    before = window_objective(raw, win, fixed)
    after = window_objective(cleaned, win, fixed)
    if after > before + TOLERANCE * max(1.0, abs(before)):
        raise ScheduleVerificationError(f"storage cleanup raised the objective from {before} to {after}")
    violations = verify_schedule(cleaned, win, varmap.model, fixed)
    if violations:
        logger.error(
            "Extracted schedule fails verification",
            model=varmap.model.value,
            count=len(violations),
            first=violations[0].message,
        )
        raise ScheduleVerificationError(
            f"{len(violations)} violations, first: {violations[0].equation} {violations[0].message}"
        )
    return cleaned


def _runs(values: Sequence[int]) -> List[int]:
    """Start offsets of the runs of ones in ``values``."""
    starts = []
    previous = 0
    for offset, value in enumerate(values):
        if value and not previous:
            starts.append(offset)
        previous = value
    return starts


def _peb_violations(peb: np.ndarray, win: WindowInput, model: ModelKind) -> List[Violation]:
    scenario = win.scenario
    N, M = scenario.fleet.bus_count, scenario.station.pile_count
    per_interval = scenario.fleet.energy_per_interval(scenario.grid)
    found: List[Violation] = []

    for k, count in enumerate(peb.sum(axis=0)):
        if count > M:
            found.append(Violation(equation="eq5", indices={"k": k}, message=f"{count} buses on charge, {M} piles"))

    for n in range(N):
        boundary = win.boundaries[n]
        allowed = win.chargeable(n)
        current = win.current_parking(n)
        for k in np.flatnonzero(peb[n]):
            k = int(k)
            if k in allowed:
                continue
            if boundary.block_done and current is not None and current.contains(k):
                found.append(
                    Violation(
                        equation="eq10",
                        indices={"n": n, "k": k},
                        message=f"bus {n} restarts after finishing its block in the current parking",
                    )
                )
            else:
                found.append(
                    Violation(equation="eq6", indices={"n": n, "k": k}, message=f"bus {n} charges while away at {k}")
                )

        if model is not ModelKind.RELAXED_A:
            for parking in win.parkings(n):
                in_progress = parking.event.open_start and parking.first == 0
                if in_progress and boundary.block_done:
                    continue
                pattern = [int(peb[n, k]) for k in parking.intervals]
                starts = _runs(pattern)
                if in_progress and boundary.charging_prev and pattern and pattern[0]:
                    limit = 1
                elif in_progress and boundary.charging_prev:
                    limit = 0
                else:
                    limit = 1
                if len(starts) > limit:
                    found.append(
                        Violation(
                            equation="eq7-10",
                            indices={"n": n, "i": parking.index},
                            message=f"bus {n} charges in {len(starts)} blocks during parking {parking.index}",
                        )
                    )

        try:
            bounds = demand_bounds(win, n)
        except PebfcsError as e:
            found.append(Violation(equation="eq11", indices={"n": n}, message=str(e)))
            continue
        chargeable = win.chargeable(n)
        for parking, low, high, anchor in bounds:
            delivered = per_interval * sum(
                int(peb[n, k]) for k, p in chargeable.items() if anchor <= p.index <= parking.index
            )
            if delivered < low - TOLERANCE:
                found.append(
                    Violation(
                        equation="eq11",
                        indices={"n": n, "j": parking.index},
                        message=f"bus {n} gets {delivered:.3f} kWh by parking {parking.index}, needs {low:.3f}",
                    )
                )
            if delivered > high + TOLERANCE:
                found.append(
                    Violation(
                        equation="eq11",
                        indices={"n": n, "j": parking.index},
                        message=f"bus {n} gets {delivered:.3f} kWh by parking {parking.index}, holds {high:.3f}",
                    )
                )
    return found


def _ess_violations(schedule: ChargeSchedule, win: WindowInput) -> List[Violation]:
    ess = win.scenario.ess
    pc = np.asarray(schedule.ess_charge_kw)
    pd = np.asarray(schedule.ess_discharge_kw)
    soc = np.asarray(schedule.ess_soc)
    max_c = ess.max_charge_kw if ess.has_storage else 0.0
    max_d = ess.max_discharge_kw if ess.has_storage else 0.0
    found: List[Violation] = []
    for k in range(len(pc)):
        if pc[k] < -TOLERANCE or pc[k] > max_c + TOLERANCE:
            found.append(Violation(equation="eq19", indices={"k": k}, message=f"charge power {pc[k]:.6g} kW"))
        if pd[k] < -TOLERANCE or pd[k] > max_d + TOLERANCE:
            found.append(Violation(equation="eq20", indices={"k": k}, message=f"discharge power {pd[k]:.6g} kW"))
        if pc[k] > TOLERANCE and pd[k] > TOLERANCE:
            found.append(
                Violation(equation="eq23", indices={"k": k}, message=f"charges {pc[k]:.6g} and discharges {pd[k]:.6g}")
            )
    expected = ess_soc_trajectory(pc, pd, win)
    for k in np.flatnonzero(np.abs(soc - expected) > TOLERANCE):
        found.append(
            Violation(
                equation="eq21",
                indices={"k": int(k)},
                message=f"SOC {soc[k]:.9f} differs from recurrence {expected[k]:.9f}",
            )
        )
    if ess.has_storage:
        for k in range(1, len(soc)):
            if soc[k] < ess.soc_min - TOLERANCE or soc[k] > 1 + TOLERANCE:
                found.append(Violation(equation="eq22", indices={"k": k}, message=f"SOC {soc[k]:.6f} out of range"))
    if abs(soc[-1] - soc[0]) > TOLERANCE:
        found.append(
            Violation(
                equation="eq24",
                indices={},
                message=f"final SOC {soc[-1]:.9f} differs from initial {soc[0]:.9f}",
            )
        )
    return found


def verify_schedule(
    schedule: ChargeSchedule,
    win: WindowInput,
    model: ModelKind = ModelKind.B,
    fixed_peb_load_kw: Optional[Sequence[float]] = None,
) -> List[Violation]:
    """Re-check a schedule against the constraints of ``model``.

    An empty list means every constraint holds within 1e-6. Bus constraints
    are skipped for Model C; storage constraints for Models A and relaxed A.
    """
    K = win.interval_count
    N = win.scenario.fleet.bus_count
    if schedule.interval_count != K:
        return [Violation(equation="shape", message=f"schedule has {schedule.interval_count} intervals, window has {K}")]
    found: List[Violation] = []

    if model is not ModelKind.C:
        peb = schedule.peb_matrix()
        if peb.shape != (N, K):
            return [Violation(equation="shape", message=f"charging matrix is {peb.shape}, expected {(N, K)}")]
        found.extend(_peb_violations(peb.astype(int), win, model))
        if schedule.pile_state:
            piles = np.asarray(schedule.pile_state).sum(axis=0)
            for k in np.flatnonzero(piles != peb.sum(axis=0)):
                found.append(
                    Violation(equation="fcp", indices={"k": int(k)}, message="active piles differ from buses on charge")
                )

    if model in (ModelKind.B, ModelKind.C):
        found.extend(_ess_violations(schedule, win))
    elif np.any(np.asarray(schedule.ess_charge_kw)) or np.any(np.asarray(schedule.ess_discharge_kw)):
        found.append(Violation(equation="eq19", message="storage power in a model without storage"))
    return found
