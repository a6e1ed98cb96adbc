"""Bounded-variable primal simplex on a dense tableau.

Columns are shifted so every structural variable lives in ``[0, range]``;
nonbasic variables sit at either bound. Pricing is Dantzig's largest reduced
cost until the method stalls on degenerate pivots for 3 x (rows + cols)
iterations, after which Bland's smallest-index rule takes over for the rest
of the phase. Every row starts with a unit column (a slack with coefficient
+1 or an artificial), so those columns of the tableau always hold B^-1.
"""

import math
import time
from typing import List, Optional, Tuple

import numpy as np
import structlog

from ..errors import NumericalError
from .instance import MilpInstance, MilpSolution, SolveStatus, SolverConfig

logger = structlog.get_logger()

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9
_REFRESH_EVERY = 50


class _Unbounded(Exception):
    pass


class _Tableau:
    """Mutable state of one LP solve."""

    def __init__(self, a_full: np.ndarray, rhs: np.ndarray, ranges: np.ndarray, identity: np.ndarray):
        self.a_full = a_full
        self.rhs = rhs
        self.t = a_full.copy()
        self.ranges = ranges
        self.identity = identity
        self.basis = identity.copy()
        self.x_b = rhs.copy()
        self.at_upper = np.zeros(a_full.shape[1], dtype=bool)
        self.iterations = 0

    def basic_mask(self) -> np.ndarray:
        mask = np.zeros(self.t.shape[1], dtype=bool)
        mask[self.basis] = True
        return mask

    def refresh(self) -> None:
        """Recompute basic values from B^-1 to wash out drift."""
        if not len(self.basis):
            return
        b_inv = self.t[:, self.identity]
        nonbasic_upper = self.at_upper & ~self.basic_mask()
        shifted = self.rhs - self.a_full[:, nonbasic_upper] @ self.ranges[nonbasic_upper]
        self.x_b = b_inv @ shifted

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        if not len(self.basis):
            return cost.copy()
        return cost - cost[self.basis] @ self.t

    def objective(self, cost: np.ndarray) -> float:
        value = float(cost[self.basis] @ self.x_b) if len(self.basis) else 0.0
        nonbasic_upper = self.at_upper & ~self.basic_mask()
        return value + float(cost[nonbasic_upper] @ self.ranges[nonbasic_upper])

    def pivot(self, r: int, q: int) -> np.ndarray:
        alpha = self.t[:, q].copy()
        row = self.t[r] / alpha[r]
        self.t -= np.outer(alpha, row)
        self.t[r] = row
        return row

    def iterate(self, cost: np.ndarray, max_iterations: int) -> None:
        """Run simplex pivots for ``cost`` until optimal; raises _Unbounded."""
        m, n = self.t.shape
        d = self.reduced_costs(cost)
        stall_limit = 3 * (m + n)
        degenerate_run = 0
        bland = False
        while True:
            if self.iterations >= max_iterations:
                raise NumericalError(f"simplex exceeded {max_iterations} iterations")
            if self.iterations % _REFRESH_EVERY == 0 and self.iterations:
                self.refresh()
                d = self.reduced_costs(cost)

            basic = self.basic_mask()
            can_increase = ~basic & ~self.at_upper & (self.ranges > 0) & (d < -_COST_TOL)
            can_decrease = ~basic & self.at_upper & (d > _COST_TOL)
            eligible = can_increase | can_decrease
            if not eligible.any():
                return
            if bland:
                q = int(np.flatnonzero(eligible)[0])
            else:
                q = int(np.argmax(np.where(eligible, np.abs(d), -1.0)))
            direction = 1.0 if can_increase[q] else -1.0

            alpha = self.t[:, q]
            rate = direction * alpha
            limits = np.full(m, math.inf)
            falling = rate > _PIVOT_TOL
            rising = rate < -_PIVOT_TOL
            limits[falling] = self.x_b[falling] / rate[falling]
            upper_b = self.ranges[self.basis]
            limits[rising] = (upper_b[rising] - self.x_b[rising]) / (-rate[rising])
            np.maximum(limits, 0.0, out=limits)
            t_row = float(limits.min()) if m else math.inf
            t_flip = float(self.ranges[q])
            if math.isinf(t_row) and math.isinf(t_flip):
                raise _Unbounded()

            self.iterations += 1
            if t_flip <= t_row:
                self.x_b -= rate * t_flip
                self.at_upper[q] = not self.at_upper[q]
                degenerate_run = 0 if t_flip > 1e-12 else degenerate_run + 1
                continue

            ties = np.flatnonzero(limits <= t_row + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            leaving = int(self.basis[r])
            leaves_at_upper = bool(rate[r] < 0)
            entering_value = t_row if direction > 0 else float(self.ranges[q]) - t_row

            self.x_b -= rate * t_row
            row = self.pivot(r, q)
            d = d - d[q] * row
            self.x_b[r] = entering_value
            self.basis[r] = q
            self.at_upper[leaving] = leaves_at_upper
            self.at_upper[q] = False

            if t_row <= 1e-12:
                degenerate_run += 1
                if not bland and degenerate_run > stall_limit:
                    bland = True
                    logger.debug("Simplex stalled, switching to Bland's rule", iterations=self.iterations)
            else:
                degenerate_run = 0

    def drive_out_artificials(self, first_artificial: int) -> None:
        """Pivot basic artificials out; rows with no replacement are redundant."""
        basic = self.basic_mask()
        for r in range(len(self.basis)):
            if self.basis[r] < first_artificial:
                continue
            row = np.abs(self.t[r, :first_artificial])
            row[basic[:first_artificial]] = 0.0
            j = int(np.argmax(row)) if row.size else -1
            if j < 0 or row[j] <= 1e-7:
                continue
            leaving = int(self.basis[r])
            value = float(self.ranges[j]) if self.at_upper[j] else 0.0
            self.pivot(r, j)
            self.basis[r] = j
            self.x_b[r] = value
            self.at_upper[j] = False
            self.at_upper[leaving] = False
            basic[j] = True
            basic[leaving] = False
        self.ranges[first_artificial:] = 0.0
        self.refresh()


def solve_lp(
    instance: MilpInstance,
    config: Optional[SolverConfig] = None,
    lower: Optional[np.ndarray] = None,
    upper: Optional[np.ndarray] = None,
) -> MilpSolution:
    """Solve the LP relaxation of ``instance`` (binaries treated as [lb, ub]).

    ``lower``/``upper`` override the instance bounds, which is how branch-and-
    bound fixes binaries without rebuilding the instance.
    """
    config = config or SolverConfig()
    started = time.perf_counter()
    a, senses, b, c, c0, lb0, ub0 = instance.arrays()
    lb = lb0 if lower is None else np.asarray(lower, dtype=float)
    ub = ub0 if upper is None else np.asarray(upper, dtype=float)

    def verdict(status: SolveStatus) -> MilpSolution:
        return MilpSolution(status=status, nodes=1, wall_seconds=time.perf_counter() - started)

    if np.any(lb > ub + config.feasibility_tol):
        return verdict(SolveStatus.INFEASIBLE)

    n = a.shape[1]
    offset = np.zeros(n)
    # (variable, sign, range) per tableau column; fixed variables get none.
    columns: List[Tuple[int, float, float]] = []
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if math.isfinite(lo) and math.isfinite(hi) and hi - lo <= 1e-12:
            offset[j] = lo
        elif math.isfinite(lo):
            offset[j] = lo
            columns.append((j, 1.0, hi - lo))
        elif math.isfinite(hi):
            offset[j] = hi
            columns.append((j, -1.0, math.inf))
        else:
            columns.extend([(j, 1.0, math.inf), (j, -1.0, math.inf)])
    col_var = np.asarray([col[0] for col in columns], dtype=int)
    col_sign = np.asarray([col[1] for col in columns], dtype=float)
    col_range = [col[2] for col in columns]

    structural = a[:, col_var] * col_sign if len(col_var) else np.zeros((a.shape[0], 0))
    rhs = b - a @ offset
    cost = c[col_var] * col_sign if len(col_var) else np.zeros(0)

    # Rows without movable columns are constant checks.
    keep = np.any(np.abs(structural) > 0, axis=1) if structural.size else np.zeros(len(b), dtype=bool)
    for i in np.flatnonzero(~keep):
        tol = config.feasibility_tol * (1 + abs(b[i]))
        if (
            (senses[i] < 0 and rhs[i] < -tol)
            or (senses[i] > 0 and rhs[i] > tol)
            or (senses[i] == 0 and abs(rhs[i]) > tol)
        ):
            return verdict(SolveStatus.INFEASIBLE)
    structural, rhs, row_senses = structural[keep], rhs[keep], senses[keep]
    m, n_struct = structural.shape

    slack_rows = [i for i in range(m) if row_senses[i] != 0]
    slack = np.zeros((m, len(slack_rows)))
    for idx, i in enumerate(slack_rows):
        slack[i, idx] = 1.0 if row_senses[i] < 0 else -1.0
    body = np.hstack([structural, slack])
    negative = rhs < 0
    body[negative] *= -1.0
    rhs = np.where(negative, -rhs, rhs)

    identity = np.full(m, -1, dtype=int)
    for idx, i in enumerate(slack_rows):
        if body[i, n_struct + idx] == 1.0:
            identity[i] = n_struct + idx
    art_rows = np.flatnonzero(identity < 0)
    first_artificial = body.shape[1]
    artificial = np.zeros((m, len(art_rows)))
    artificial[art_rows, np.arange(len(art_rows))] = 1.0
    identity[art_rows] = first_artificial + np.arange(len(art_rows))

    a_full = np.hstack([body, artificial])
    ranges = np.concatenate(
        [np.asarray(col_range, dtype=float), np.full(len(slack_rows) + len(art_rows), math.inf)]
    )
    tableau = _Tableau(a_full, rhs, ranges, identity)
    max_iterations = 50 * (m + a_full.shape[1]) + 1000

    if len(art_rows):
        phase_one = np.zeros(a_full.shape[1])
        phase_one[first_artificial:] = 1.0
        tableau.iterate(phase_one, max_iterations)
        tableau.refresh()
        infeasibility = tableau.objective(phase_one)
        if infeasibility > config.feasibility_tol * max(1.0, float(np.max(np.abs(rhs), initial=0.0))):
            return verdict(SolveStatus.INFEASIBLE)
        tableau.drive_out_artificials(first_artificial)

    phase_two = np.concatenate([cost, np.zeros(a_full.shape[1] - n_struct)])
    try:
        tableau.iterate(phase_two, max_iterations)
    except _Unbounded:
        return verdict(SolveStatus.UNBOUNDED)
    tableau.refresh()

    y = np.where(tableau.at_upper, tableau.ranges, 0.0)
    y[tableau.basis] = tableau.x_b
    x = offset.copy()
    np.add.at(x, col_var, col_sign * y[:n_struct])
    x = np.clip(x, lb, ub)

    violation = instance.max_violation(x, lb, ub)
    if violation > max(1e-5, 10 * config.feasibility_tol):
        logger.error(
            "Simplex returned an inaccurate point",
            instance=instance.name,
            violation=violation,
            iterations=tableau.iterations,
        )
        raise NumericalError(f"LP solution violates constraints by {violation:.3g}")

    objective = instance.objective_value(x)
    return MilpSolution(
        status=SolveStatus.OPTIMAL,
        objective=objective,
        values=tuple(float(v) for v in x),
        bound=objective,
        nodes=1,
        wall_seconds=time.perf_counter() - started,
    )
