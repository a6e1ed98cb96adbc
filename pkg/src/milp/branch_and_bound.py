"""Branch-and-bound over binary variables, plus an enumeration oracle."""

import heapq
import itertools
import math
import time
from typing import List, Optional, Tuple

import numpy as np
import structlog

from ..errors import TooManyBinariesError
from .instance import MilpInstance, MilpSolution, SolveStatus, SolverConfig, VarKind
from .simplex import solve_lp

logger = structlog.get_logger()

BRUTE_FORCE_LIMIT = 24


def _most_fractional(x: np.ndarray, binaries: List[int], tol: float) -> Optional[int]:
    best, best_score = None, tol
    for j in binaries:
        score = abs(x[j] - round(x[j]))
        if score > best_score + 1e-12:
            best, best_score = j, score
    return best


class _Search:
    """Best-bound tree search state."""

    def __init__(self, instance: MilpInstance, config: SolverConfig):
        self.instance = instance
        self.config = config
        self.binaries = instance.binary_indices()
        self.started = time.perf_counter()
        self.nodes = 0
        self.incumbent: Optional[np.ndarray] = None
        self.incumbent_value = math.inf
        self.heap: List[Tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []
        self.seq = itertools.count()

    def cutoff(self) -> float:
        if self.incumbent is None:
            return math.inf
        return self.incumbent_value - self.config.relative_gap * max(1.0, abs(self.incumbent_value))

    def solve_node(self, lower: np.ndarray, upper: np.ndarray) -> MilpSolution:
        self.nodes += 1
        return solve_lp(self.instance, self.config, lower, upper)

    def offer(self, solution: MilpSolution, lower: np.ndarray, upper: np.ndarray) -> None:
        """Record an LP node: as incumbent when integral, otherwise queue it."""
        if solution.status is not SolveStatus.OPTIMAL:
            return
        x = solution.value_array()
        if _most_fractional(x, self.binaries, self.config.integrality_tol) is None:
            self.try_incumbent(x, lower, upper)
        elif solution.objective < self.cutoff():
            heapq.heappush(self.heap, (solution.objective, next(self.seq), lower, upper, x))

    def try_incumbent(self, x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> None:
        snapped = x.copy()
        snapped[self.binaries] = np.round(snapped[self.binaries])
        if self.instance.max_violation(snapped) > self.config.feasibility_tol:
            # Snapping moved the point off the polytope; re-solve with binaries pinned.
            lo, hi = lower.copy(), upper.copy()
            lo[self.binaries] = snapped[self.binaries]
            hi[self.binaries] = snapped[self.binaries]
            pinned = self.solve_node(lo, hi)
            if pinned.status is not SolveStatus.OPTIMAL:
                return
            snapped = pinned.value_array()
            snapped[self.binaries] = np.round(snapped[self.binaries])
        value = self.instance.objective_value(snapped)
        if value < self.incumbent_value - 1e-12:
            self.incumbent, self.incumbent_value = snapped, value
            logger.debug("New incumbent", objective=value, nodes=self.nodes)

    def out_of_budget(self) -> Optional[SolveStatus]:
        if self.config.node_limit is not None and self.nodes >= self.config.node_limit:
            return SolveStatus.NODE_LIMIT
        limit = self.config.time_limit_seconds
        if limit is not None and time.perf_counter() - self.started >= limit:
            return SolveStatus.GAP_LIMIT
        return None

    def result(self, status: SolveStatus) -> MilpSolution:
        open_bounds = [entry[0] for entry in self.heap]
        if self.incumbent is None:
            bound = min(open_bounds) if open_bounds else None
            if status is SolveStatus.OPTIMAL:
                status = SolveStatus.INFEASIBLE
            return MilpSolution(
                status=status,
                bound=bound,
                nodes=self.nodes,
                wall_seconds=time.perf_counter() - self.started,
            )
        bound = min([self.incumbent_value] + open_bounds)
        return MilpSolution(
            status=status,
            objective=self.incumbent_value,
            values=tuple(float(v) for v in self.incumbent),
            bound=bound,
            nodes=self.nodes,
            wall_seconds=time.perf_counter() - self.started,
        )


def solve_milp(instance: MilpInstance, config: Optional[SolverConfig] = None) -> MilpSolution:
    """Solve ``instance`` to proven optimality within ``config.relative_gap``.

    Branches on the most fractional binary (lowest index on ties) and explores
    nodes best-bound first, FIFO among equal bounds. ``nodes`` counts LP
    relaxations solved, the root included.

    Args:
        instance: Minimisation MILP whose integer variables are all binary
        config: Tolerances and limits; defaults to ``SolverConfig()``

    Returns:
        Optimal solution, an infeasible/unbounded verdict from the root, or a
        limit status carrying the best incumbent (if any) and the open bound
    """
    config = config or SolverConfig()
    search = _Search(instance, config)
    lower, upper = instance.bounds()

    root = search.solve_node(lower, upper)
    if root.status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
        logger.info("Root relaxation has no optimum", instance=instance.name, status=root.status.value)
        return root.model_copy(update={"wall_seconds": time.perf_counter() - search.started})
    search.offer(root, lower, upper)

    status = SolveStatus.OPTIMAL
    while search.heap:
        bound, _, node_lower, node_upper, x = heapq.heappop(search.heap)
        if bound >= search.cutoff():
            search.heap.clear()
            break
        limit = search.out_of_budget()
        if limit is not None:
            heapq.heappush(search.heap, (bound, -1, node_lower, node_upper, x))
            status = limit
            break
        j = _most_fractional(x, search.binaries, config.integrality_tol)
        for value in (0.0, 1.0):
            child_lower, child_upper = node_lower.copy(), node_upper.copy()
            child_lower[j] = child_upper[j] = value
            search.offer(search.solve_node(child_lower, child_upper), child_lower, child_upper)

    solution = search.result(status)
    logger.info(
        "Branch and bound finished",
        instance=instance.name,
        status=solution.status.value,
        objective=solution.objective,
        bound=solution.bound,
        nodes=solution.nodes,
        seconds=round(solution.wall_seconds, 3),
    )
    return solution


def _row_activity_feasible(
    a: np.ndarray, senses: np.ndarray, b: np.ndarray, lower: np.ndarray, upper: np.ndarray, tol: float
) -> bool:
    """Interval check: can every row still be satisfied within the bounds?"""
    if not len(b):
        return True
    pos = np.clip(a, 0.0, None)
    neg = np.clip(a, None, 0.0)
    with np.errstate(invalid="ignore"):
        lo_terms = np.where(pos != 0, pos * lower, 0.0) + np.where(neg != 0, neg * upper, 0.0)
        hi_terms = np.where(pos != 0, pos * upper, 0.0) + np.where(neg != 0, neg * lower, 0.0)
    act_min = lo_terms.sum(axis=1)
    act_max = hi_terms.sum(axis=1)
    slack = tol * (1.0 + np.abs(b))
    too_high = (senses <= 0) & (act_min > b + slack)
    too_low = (senses >= 0) & (act_max < b - slack)
    return not bool(np.any(too_high | too_low))


def brute_force_binary(instance: MilpInstance, config: Optional[SolverConfig] = None) -> MilpSolution:
    """Exact optimum by enumerating every assignment of the free binaries.

    Continuous variables are resolved by an LP at each leaf. Subtrees whose
    fixed binaries already make a row unsatisfiable are skipped. Used as a
    test oracle for ``solve_milp``.
    """
    config = config or SolverConfig()
    started = time.perf_counter()
    lower, upper = instance.bounds()
    free = instance.free_binary_indices(lower, upper)
    if len(free) > BRUTE_FORCE_LIMIT:
        raise TooManyBinariesError(
            f"{len(free)} free binaries exceed the enumeration limit of {BRUTE_FORCE_LIMIT}"
        )
    if not instance.binary_indices():
        return solve_lp(instance, config)

    a, senses, b, _, _, _, _ = instance.arrays()
    continuous = [
        j
        for j, var in enumerate(instance.variables)
        if var.kind is VarKind.CONTINUOUS and upper[j] - lower[j] > 1e-12
    ]
    best_value, best_x, leaves, unbounded = math.inf, None, 0, False

    def leaf(lo: np.ndarray, hi: np.ndarray) -> None:
        nonlocal best_value, best_x, leaves, unbounded
        leaves += 1
        if continuous:
            sol = solve_lp(instance, config, lo, hi)
            if sol.status is SolveStatus.UNBOUNDED:
                unbounded = True
                return
            if sol.status is not SolveStatus.OPTIMAL:
                return
            x, value = sol.value_array(), sol.objective
        else:
            x = lo.copy()
            if instance.max_violation(x) > config.feasibility_tol:
                return
            value = instance.objective_value(x)
        if value < best_value - 1e-12:
            best_value, best_x = value, x

    def descend(depth: int, lo: np.ndarray, hi: np.ndarray) -> None:
        if not _row_activity_feasible(a, senses, b, lo, hi, config.feasibility_tol):
            return
        if depth == len(free):
            leaf(lo, hi)
            return
        j = free[depth]
        for value in (0.0, 1.0):
            lo[j] = hi[j] = value
            descend(depth + 1, lo, hi)
        lo[j], hi[j] = 0.0, 1.0

    descend(0, lower.copy(), upper.copy())
    elapsed = time.perf_counter() - started
    if unbounded:
        return MilpSolution(status=SolveStatus.UNBOUNDED, nodes=leaves, wall_seconds=elapsed)
    if best_x is None:
        return MilpSolution(status=SolveStatus.INFEASIBLE, nodes=leaves, wall_seconds=elapsed)
    return MilpSolution(
        status=SolveStatus.OPTIMAL,
        objective=best_value,
        values=tuple(float(v) for v in best_x),
        bound=best_value,
        nodes=leaves,
        wall_seconds=elapsed,
    )
