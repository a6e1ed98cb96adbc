"""Run an external MILP solver on an MPS export and read its answer back.

The command line comes from a template with ``{command}``, ``{model}`` and
``{solution}`` placeholders (``Settings.external_solver_template``). For CBC
use ``{command} {model} solve solu {solution}``.

Two solution formats are understood:

* simple: optional ``status <word>`` and ``objective <number>`` lines, then
  one ``<variable> <value>`` line per variable (mangled or original name);
* CBC: first line such as ``Optimal - objective value -14.0``, then rows of
  ``<index> <name> <value> <reduced cost>`` (nonzeros only).
"""

import functools
import shlex
import shutil
import subprocess
import tempfile
import time
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import structlog
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from ..config import settings
from ..errors import (
    SolutionParseError,
    SolverProcessError,
    SolverUnavailableError,
    TransientSolverError,
)
from .branch_and_bound import solve_milp
from .instance import MilpInstance, MilpSolution, SolveStatus, SolverConfig
from .mps import column_name, write_mps

logger = structlog.get_logger()

_CBC_STATUS = (
    ("optimal", SolveStatus.OPTIMAL),
    ("integer infeasible", SolveStatus.INFEASIBLE),
    ("infeasible", SolveStatus.INFEASIBLE),
    ("unbounded", SolveStatus.UNBOUNDED),
    ("stopped on nodes", SolveStatus.NODE_LIMIT),
    ("stopped on time", SolveStatus.GAP_LIMIT),
    ("stopped", SolveStatus.GAP_LIMIT),
)

_SIMPLE_STATUS = {status.value: status for status in SolveStatus}


def _parse_cbc(lines, headline: str) -> Tuple[SolveStatus, Dict[str, float]]:
    lowered = headline.lower()
    status = next((s for prefix, s in _CBC_STATUS if lowered.startswith(prefix)), None)
    if status is None:
        raise SolutionParseError(f"unrecognised CBC status line: {headline!r}")
    values: Dict[str, float] = {}
    for line in lines:
        parts = line.replace("**", " ").split()
        if not parts:
            continue
        if len(parts) < 3:
            raise SolutionParseError(f"malformed CBC solution row: {line!r}")
        try:
            values[parts[1]] = float(parts[2])
        except ValueError as e:
            raise SolutionParseError(f"malformed CBC solution row: {line!r}") from e
    return status, values


def _parse_simple(lines) -> Tuple[SolveStatus, Dict[str, float]]:
    status = SolveStatus.OPTIMAL
    values: Dict[str, float] = {}
    for line in lines:
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) != 2:
            raise SolutionParseError(f"expected '<name> <value>', got {line!r}")
        key, value = parts
        if key == "status":
            if value not in _SIMPLE_STATUS:
                raise SolutionParseError(f"unknown status {value!r}")
            status = _SIMPLE_STATUS[value]
            continue
        if key == "objective":
            continue
        try:
            values[key] = float(value)
        except ValueError as e:
            raise SolutionParseError(f"value for {key} is not a number: {value!r}") from e
    return status, values


def parse_solution(text: str, instance: MilpInstance) -> Tuple[SolveStatus, np.ndarray]:
    """Decode a solution file into a status and a full value vector.

    Variables missing from the file are zero. The objective is recomputed
    from the values rather than trusted from the file.
    """
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise SolutionParseError("solution file is empty")
    headline = lines[0].strip()
    if "objective value" in headline.lower():
        status, raw = _parse_cbc(lines[1:], headline)
    else:
        status, raw = _parse_simple(lines)

    lookup = {column_name(j): j for j in range(instance.variable_count)}
    lookup.update({var.name: j for j, var in enumerate(instance.variables)})
    x = np.zeros(instance.variable_count)
    for name, value in raw.items():
        if name not in lookup:
            raise SolutionParseError(f"solution names unknown variable {name!r}")
        x[lookup[name]] = value
    return status, x


def _run(argv, timeout: Optional[float]) -> None:
    try:
        completed = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    except FileNotFoundError as e:
        raise SolverUnavailableError(f"solver executable not found: {argv[0]}") from e
    except subprocess.TimeoutExpired as e:
        raise SolverProcessError(f"solver exceeded {timeout}s", returncode=None, stderr=str(e.stderr or "")) from e
    if completed.returncode < 0:
        raise TransientSolverError(
            f"solver killed by signal {-completed.returncode}",
            returncode=completed.returncode,
            stderr=completed.stderr,
        )
    if completed.returncode > 0:
        raise SolverProcessError(
            f"solver exited with status {completed.returncode}",
            returncode=completed.returncode,
            stderr=completed.stderr,
        )


def solve_external(
    instance: MilpInstance,
    solver_command: str,
    config: Optional[SolverConfig] = None,
    template: Optional[str] = None,
    attempts: Optional[int] = None,
) -> MilpSolution:
    """Solve ``instance`` with an external executable.

    Args:
        instance: Model to export
        solver_command: Executable name or path (looked up on PATH)
        config: Tolerances; the time limit also bounds the subprocess
        template: Argument template; defaults to the configured one
        attempts: Tries when the solver is killed by a signal

    Returns:
        Solution with the objective recomputed from the returned values

    Raises:
        SolverUnavailableError: executable missing
        SolverProcessError: nonzero exit status or timeout
        SolutionParseError: missing or unreadable solution file
    """
    config = config or SolverConfig()
    template = template or settings.external_solver_template
    attempts = attempts or settings.external_solver_retries
    if shutil.which(solver_command) is None:
        logger.error("External solver not found", command=solver_command)
        raise SolverUnavailableError(f"solver executable not found: {solver_command}")

    @retry(
        stop=stop_after_attempt(attempts),
        wait=wait_exponential(multiplier=0.5, min=0.5, max=5),
        retry=retry_if_exception_type(TransientSolverError),
        reraise=True,
    )
    def run_once(argv):
        _run(argv, config.time_limit_seconds * 2 + 30 if config.time_limit_seconds else None)

    started = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="pebfcs-") as workdir:
        model_path = Path(workdir) / "model.mps"
        solution_path = Path(workdir) / "solution.txt"
        model_path.write_text(write_mps(instance))
        argv = shlex.split(
            template.format(command=solver_command, model=str(model_path), solution=str(solution_path))
        )
        logger.info("Running external solver", command=argv[0], instance=instance.name)
        try:
            run_once(argv)
        except SolverProcessError as e:
            logger.error("External solver failed", returncode=e.returncode, stderr=(e.stderr or "")[-500:])
            raise
        if not solution_path.exists():
            raise SolutionParseError(f"solver wrote no solution file at {solution_path}")
        status, x = parse_solution(solution_path.read_text(), instance)

    elapsed = time.perf_counter() - started
    if status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
        return MilpSolution(status=status, wall_seconds=elapsed)
    binaries = instance.binary_indices()
    x[binaries] = np.round(x[binaries])
    objective = instance.objective_value(x)
    return MilpSolution(
        status=status,
        objective=objective,
        values=tuple(float(v) for v in x),
        bound=objective if status is SolveStatus.OPTIMAL else None,
        nodes=0,
        wall_seconds=elapsed,
    )


MilpSolver = Callable[..., MilpSolution]


def resolve_solver(spec: str) -> MilpSolver:
    """``builtin`` or ``external:<command>`` to a callable ``(instance, config=...)``.

    Raises:
        ValueError: unknown solver spec
    """
    if spec == "builtin":
        return solve_milp
    kind, _, command = spec.partition(":")
    if kind != "external" or not command:
        raise ValueError(f"solver must be 'builtin' or 'external:<command>', got {spec!r}")
    return functools.partial(solve_external, solver_command=command)
