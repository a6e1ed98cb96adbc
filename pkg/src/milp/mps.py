"""Fixed-format MPS export, a minimal reader, and a tagged constraint dump.

Names are mangled to eight characters (``X0000001`` for columns,
``R0000001`` for rows, ``COST`` for the objective). The original names are
kept in ``*`` comment lines so ``read_mps`` restores them; other readers
ignore comments. The objective constant is written as the RHS of the
objective row with its sign flipped, the usual MPS convention.
"""

import math
from typing import Dict, List, Tuple

from ..errors import SolutionParseError
from .instance import Constraint, MilpInstance, Sense, Variable, VarKind

OBJECTIVE_ROW = "COST"
_ROW_TYPES = {Sense.LE: "L", Sense.EQ: "E", Sense.GE: "G"}
_SECTIONS = {"NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"}


def column_name(j: int) -> str:
    return f"X{j + 1:07d}"


def row_name(i: int) -> str:
    return f"R{i + 1:07d}"


def _num(value: float) -> str:
    return f"{value:.12g}"


def _entry(first: str, second: str, value: float) -> str:
    return f"    {first:<8}  {second:<8}  {_num(value)}"


def _marker(tag: str) -> str:
    return f"    MARKER                 'MARKER'                 {tag}"


def _bound(kind: str, column: str, value=None) -> str:
    line = f" {kind} BND       {column:<8}"
    return line if value is None else f"{line}  {_num(value)}"


def write_mps(instance: MilpInstance) -> str:
    """Render ``instance`` as fixed-format MPS text."""
    lines = [f"NAME          {instance.name[:8].upper() or 'MODEL'}"]
    for j, var in enumerate(instance.variables):
        lines.append(f"* VAR {column_name(j)} {var.name}")
    for i, con in enumerate(instance.constraints):
        lines.append(f"* ROW {row_name(i)} {con.name}")
    lines.append(f"* OBJ {OBJECTIVE_ROW} {instance.name}")

    lines.append("ROWS")
    lines.append(f" N  {OBJECTIVE_ROW}")
    for i, con in enumerate(instance.constraints):
        lines.append(f" {_ROW_TYPES[con.sense]}  {row_name(i)}")

    by_column: List[List[Tuple[str, float]]] = [[] for _ in instance.variables]
    for j, coef in instance.objective:
        if coef != 0:
            by_column[j].append((OBJECTIVE_ROW, coef))
    for i, con in enumerate(instance.constraints):
        for j, coef in con.coefficients:
            if coef != 0:
                by_column[j].append((row_name(i), coef))

    lines.append("COLUMNS")
    in_integer_run = False
    for j, var in enumerate(instance.variables):
        is_binary = var.kind is VarKind.BINARY
        if is_binary != in_integer_run:
            lines.append(_marker("'INTORG'" if is_binary else "'INTEND'"))
            in_integer_run = is_binary
        entries = by_column[j] or [(OBJECTIVE_ROW, 0.0)]
        for row, coef in entries:
            lines.append(_entry(column_name(j), row, coef))
    if in_integer_run:
        lines.append(_marker("'INTEND'"))

    lines.append("RHS")
    if instance.objective_constant != 0:
        lines.append(_entry("RHS", OBJECTIVE_ROW, -instance.objective_constant))
    for i, con in enumerate(instance.constraints):
        if con.rhs != 0:
            lines.append(_entry("RHS", row_name(i), con.rhs))

    lines.append("BOUNDS")
    for j, var in enumerate(instance.variables):
        name = column_name(j)
        lo, hi = var.lower, var.upper
        if var.kind is VarKind.BINARY:
            if lo == hi:
                lines.append(_bound("FX", name, lo))
            else:
                lines.append(_bound("UP", name, hi))
            continue
        if math.isfinite(lo) and lo == hi:
            lines.append(_bound("FX", name, lo))
            continue
        if math.isinf(lo) and math.isinf(hi):
            lines.append(_bound("FR", name))
            continue
        if math.isinf(lo):
            lines.append(_bound("MI", name))
        elif lo != 0:
            lines.append(_bound("LO", name, lo))
        if math.isfinite(hi):
            lines.append(_bound("UP", name, hi))
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def read_mps(text: str) -> MilpInstance:
    """Parse MPS text produced by ``write_mps`` (whitespace-separated fields).

    Raises:
        SolutionParseError: on a malformed line or unknown row/column
    """
    names: Dict[str, str] = {}
    title = "model"
    section = None
    objective_row = None
    row_order: List[str] = []
    row_sense: Dict[str, Sense] = {}
    col_order: List[str] = []
    col_index: Dict[str, int] = {}
    col_binary: Dict[str, bool] = {}
    entries: Dict[str, List[Tuple[int, float]]] = {}
    objective: List[Tuple[int, float]] = []
    rhs: Dict[str, float] = {}
    lower: Dict[str, float] = {}
    upper: Dict[str, float] = {}
    constant = 0.0
    integer_run = False
    sense_of = {v: k for k, v in _ROW_TYPES.items()}

    for number, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith("*"):
            parts = raw.split(maxsplit=3)
            if len(parts) == 4 and parts[1] in ("VAR", "ROW"):
                names[parts[2]] = parts[3]
            elif len(parts) == 4 and parts[1] == "OBJ":
                title = parts[3]
            continue
        parts = raw.split()
        if not parts:
            continue
        if not raw[0].isspace() and parts[0] in _SECTIONS:
            section = parts[0]
            continue
        try:
            if section == "ROWS":
                kind, row = parts
                if kind == "N":
                    objective_row = row
                else:
                    row_order.append(row)
                    row_sense[row] = sense_of[kind]
                    entries[row] = []
            elif section == "COLUMNS":
                if len(parts) >= 3 and parts[1] == "'MARKER'":
                    integer_run = parts[2] == "'INTORG'"
                    continue
                column = parts[0]
                if column not in col_index:
                    col_index[column] = len(col_order)
                    col_order.append(column)
                    col_binary[column] = integer_run
                j = col_index[column]
                for row, value in zip(parts[1::2], parts[2::2]):
                    if row == objective_row:
                        if float(value) != 0:
                            objective.append((j, float(value)))
                    else:
                        entries[row].append((j, float(value)))
            elif section == "RHS":
                for row, value in zip(parts[1::2], parts[2::2]):
                    if row == objective_row:
                        constant = -float(value)
                    else:
                        rhs[row] = float(value)
            elif section == "BOUNDS":
                kind, column = parts[0], parts[2]
                value = float(parts[3]) if len(parts) > 3 else None
                if kind == "UP":
                    upper[column] = value
                elif kind == "LO":
                    lower[column] = value
                elif kind == "FX":
                    lower[column] = upper[column] = value
                elif kind == "MI":
                    lower[column] = -math.inf
                elif kind == "FR":
                    lower[column], upper[column] = -math.inf, math.inf
                elif kind == "BV":
                    lower[column], upper[column] = 0.0, 1.0
                else:
                    raise ValueError(f"unsupported bound type {kind}")
        except (KeyError, ValueError, IndexError) as e:
            raise SolutionParseError(f"MPS line {number}: {e}") from e

    variables = []
    for column in col_order:
        binary = col_binary[column]
        variables.append(
            Variable(
                name=names.get(column, column),
                lower=lower.get(column, 0.0),
                upper=upper.get(column, 1.0 if binary else math.inf),
                kind=VarKind.BINARY if binary else VarKind.CONTINUOUS,
            )
        )
    constraints = [
        Constraint(
            name=names.get(row, row),
            coefficients=tuple(entries[row]),
            sense=row_sense[row],
            rhs=rhs.get(row, 0.0),
        )
        for row in row_order
    ]
    return MilpInstance(
        name=title,
        variables=tuple(variables),
        constraints=tuple(constraints),
        objective=tuple(objective),
        objective_constant=constant,
    )


def constraint_dump(instance: MilpInstance) -> str:
    """One line per constraint: tag, expression over variable names, sense, rhs."""
    lines = []
    for con in instance.constraints:
        terms = " ".join(
            f"{'+' if coef >= 0 else '-'} {_num(abs(coef))} {instance.variables[j].name}"
            for j, coef in con.coefficients
        )
        lines.append(f"{con.name}: {terms or '0'} {con.sense.value} {_num(con.rhs)}")
    return "\n".join(lines) + "\n"
