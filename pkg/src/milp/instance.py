"""Canonical MILP representation and solver verdicts."""

import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from ..config import Settings


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(str, Enum):
    LE = "<="
    EQ = "="
    GE = ">="

    @property
    def sign(self) -> int:
        """-1 for ``<=``, 0 for ``=``, +1 for ``>=``; the code stored by ``arrays()``."""
        return _SENSE_SIGNS[self.value]


_SENSE_SIGNS = {"<=": -1, "=": 0, ">=": 1}


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    GAP_LIMIT = "gap_limit"
    NODE_LIMIT = "node_limit"


class Variable(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    lower: float = 0.0
    upper: float = math.inf
    kind: VarKind = VarKind.CONTINUOUS


class Constraint(BaseModel):
    """Sparse row ``Σ coef·x  sense  rhs``; ``name`` carries the equation tag."""

    model_config = ConfigDict(frozen=True)

    name: str
    coefficients: Tuple[Tuple[int, float], ...]
    sense: Sense
    rhs: float


class MilpInstance(BaseModel):
    """Minimisation problem over continuous and binary variables."""

    model_config = ConfigDict(frozen=True)

    name: str = "model"
    variables: Tuple[Variable, ...]
    constraints: Tuple[Constraint, ...] = ()
    objective: Tuple[Tuple[int, float], ...] = ()
    objective_constant: float = 0.0

    _arrays: Optional[tuple] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _well_formed(self) -> "MilpInstance":
        n = len(self.variables)
        for var in self.variables:
            if math.isnan(var.lower) or math.isnan(var.upper):
                raise ValueError(f"variable {var.name} has a NaN bound")
            if var.kind is VarKind.BINARY and (var.lower < 0 or var.upper > 1):
                raise ValueError(f"binary {var.name} has bounds outside [0, 1]")
        rows = [(c.name, c.coefficients, c.rhs) for c in self.constraints]
        rows.append(("objective", self.objective, self.objective_constant))
        for name, coefficients, rhs in rows:
            if not math.isfinite(rhs):
                raise ValueError(f"{name}: non-finite right-hand side")
            for idx, coef in coefficients:
                if not 0 <= idx < n:
                    raise ValueError(f"{name}: unknown variable index {idx}")
                if not math.isfinite(coef):
                    raise ValueError(f"{name}: non-finite coefficient on {self.variables[idx].name}")
        return self

    @property
    def variable_count(self) -> int:
        return len(self.variables)

    def binary_indices(self) -> List[int]:
        return [j for j, v in enumerate(self.variables) if v.kind is VarKind.BINARY]

    def free_binary_indices(self, lower=None, upper=None) -> List[int]:
        lb, ub = self.bounds() if lower is None else (lower, upper)
        return [j for j in self.binary_indices() if ub[j] - lb[j] > 0.5]

    def index_of(self) -> Dict[str, int]:
        return {v.name: j for j, v in enumerate(self.variables)}

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        arrays = self.arrays()
        return arrays[5].copy(), arrays[6].copy()

    def arrays(self):
        """Dense (A, sense signs, b, c, c0, lower, upper); cached per instance.

        Senses come back as an int8 array of ``Sense.sign`` codes.
        """
        if self._arrays is None:
            n = len(self.variables)
            m = len(self.constraints)
            a = np.zeros((m, n))
            b = np.zeros(m)
            senses = np.zeros(m, dtype=np.int8)
            for i, con in enumerate(self.constraints):
                for j, coef in con.coefficients:
                    a[i, j] += coef
                b[i] = con.rhs
                senses[i] = con.sense.sign
            c = np.zeros(n)
            for j, coef in self.objective:
                c[j] += coef
            lower = np.array([v.lower for v in self.variables], dtype=float)
            upper = np.array([v.upper for v in self.variables], dtype=float)
            self._arrays = (a, senses, b, c, self.objective_constant, lower, upper)
        return self._arrays

    def objective_value(self, x: np.ndarray) -> float:
        c = self.arrays()[3]
        return float(c @ x) + self.objective_constant

    def max_violation(self, x: np.ndarray, lower=None, upper=None) -> float:
        """Largest constraint or bound violation of ``x`` (scaled by 1 + |rhs|)."""
        a, senses, b, _, _, lb, ub = self.arrays()
        lb = lb if lower is None else lower
        ub = ub if upper is None else upper
        worst = float(np.max(np.maximum(lb - x, 0.0), initial=0.0))
        worst = max(worst, float(np.max(np.maximum(x - ub, 0.0), initial=0.0)))
        if len(b):
            act = a @ x
            le = senses < 0
            ge = senses > 0
            eq = senses == 0
            viol = np.zeros(len(b))
            viol[le] = act[le] - b[le]
            viol[ge] = b[ge] - act[ge]
            viol[eq] = np.abs(act[eq] - b[eq])
            worst = max(worst, float(np.max(np.maximum(viol, 0.0) / (1.0 + np.abs(b)))))
        return worst


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    feasibility_tol: float = Field(1e-6, gt=0)
    integrality_tol: float = Field(1e-6, gt=0)
    relative_gap: float = Field(1e-4, gt=0)
    node_limit: Optional[int] = Field(None, ge=1)
    time_limit_seconds: Optional[float] = Field(None, gt=0)

    @classmethod
    def from_settings(cls, settings: Settings) -> "SolverConfig":
        return cls(
            feasibility_tol=settings.feasibility_tol,
            integrality_tol=settings.integrality_tol,
            relative_gap=settings.relative_gap,
            node_limit=settings.node_limit,
            time_limit_seconds=settings.time_limit_seconds,
        )


class MilpSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    status: SolveStatus
    objective: Optional[float] = None
    values: Tuple[float, ...] = ()
    bound: Optional[float] = None
    nodes: int = 0
    wall_seconds: float = 0.0

    @property
    def has_incumbent(self) -> bool:
        return bool(self.values) and self.status in (
            SolveStatus.OPTIMAL,
            SolveStatus.GAP_LIMIT,
            SolveStatus.NODE_LIMIT,
        )

    def value_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def by_name(self, instance: MilpInstance) -> Dict[str, float]:
        return {v.name: self.values[j] for j, v in enumerate(instance.variables)}
