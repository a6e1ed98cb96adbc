"""AOC comparisons, storage sweeps and CSV/JSON output of episodes."""

import json
from concurrent.futures import ProcessPoolExecutor
from decimal import Decimal
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict

from .config import settings
from .controller.rolling import EpisodeResult, StrategyKind, run_episode
from .costs import MINUTES_PER_YEAR
from .domain import CostBreakdown, Scenario, TimeGrid
from .errors import ScenarioMismatchError
from .milp import resolve_solver
from .scenario import band_labels

logger = structlog.get_logger()

PathLike = Union[str, Path]

COMPARISON_COLUMNS = [
    "label",
    "ess_price",
    "aoc_baseline",
    "aoc",
    "aoc_reduction_pct",
    "peak_baseline_kw",
    "peak_kw",
    "peak_reduction_pct",
    "mean_solve_seconds",
]


def annualize(cost: CostBreakdown, grid: TimeGrid) -> Decimal:
    """AOC: the window total scaled from the window length to a year."""
    factor = Decimal(MINUTES_PER_YEAR) / (Decimal(grid.interval_count) * Decimal(repr(grid.interval_minutes)))
    return cost.window_total * factor


def reduction_pct(baseline: float, value: float) -> float:
    """Percentage by which ``value`` is below ``baseline`` (0 for a zero baseline)."""
    if baseline == 0:
        return 0.0
    return (baseline - value) / baseline * 100.0


def episode_aoc(result: EpisodeResult) -> float:
    return float(result.costs.annualized_total)


def compare_runs(results: Sequence[EpisodeResult], baseline: Optional[str] = None) -> pd.DataFrame:
    """Reductions of AOC and peak against a baseline run.

    Args:
        results: Episode results of one scenario
        baseline: Label of the baseline run; the first result by default

    Returns:
        One row per run with the columns of ``COMPARISON_COLUMNS``

    Raises:
        ScenarioMismatchError: runs come from different scenarios or the
            baseline label is unknown
    """
    if not results:
        return pd.DataFrame(columns=COMPARISON_COLUMNS)
    fingerprints = {r.case_fingerprint for r in results}
    if len(fingerprints) > 1:
        raise ScenarioMismatchError(f"runs come from {len(fingerprints)} different scenarios")
    if baseline is None:
        base = results[0]
    else:
        matches = [r for r in results if r.label == baseline]
        if not matches:
            raise ScenarioMismatchError(f"no run labelled {baseline!r}")
        base = matches[0]

    base_aoc, base_peak = episode_aoc(base), base.realized_peak_kw
    rows = []
    for r in results:
        aoc = episode_aoc(r)
        rows.append(
            {
                "label": r.label,
                "ess_price": r.ess_price,
                "aoc_baseline": base_aoc,
                "aoc": aoc,
                "aoc_reduction_pct": reduction_pct(base_aoc, aoc),
                "peak_baseline_kw": base_peak,
                "peak_kw": r.realized_peak_kw,
                "peak_reduction_pct": reduction_pct(base_peak, r.realized_peak_kw),
                "mean_solve_seconds": r.mean_solve_seconds,
            }
        )
    return pd.DataFrame(rows, columns=COMPARISON_COLUMNS)


class SweepPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    aoc: float
    peak_kw: float


class SweepCurve(BaseModel):
    """AOC against a swept storage parameter (capacity in kWh or unit price)."""

    model_config = ConfigDict(frozen=True)

    parameter: str
    strategy: StrategyKind
    points: Tuple[SweepPoint, ...]
    knee: Optional[float] = None

    def frame(self) -> pd.DataFrame:
        df = pd.DataFrame([p.model_dump() for p in self.points], columns=["value", "aoc", "peak_kw"])
        return df.rename(columns={"value": self.parameter})


def find_knee(values: Sequence[float], aocs: Sequence[float], threshold: Optional[float] = None) -> Optional[float]:
    """First value after which AOC improves by less than ``threshold`` (relative).

    Returns the last value when the curve keeps improving, ``None`` for an
    empty sweep.
    """
    threshold = settings.knee_threshold if threshold is None else threshold
    if not values:
        return None
    for i in range(1, len(values)):
        previous = aocs[i - 1]
        gain = (previous - aocs[i]) / abs(previous) if previous else 0.0
        if gain < threshold:
            return values[i - 1]
    return values[-1]


def _episode_point(job) -> SweepPoint:
    scenario, strategy, value, seed, solver_spec, horizon_days = job
    result = run_episode(
        scenario,
        strategy,
        horizon_days=horizon_days,
        seed=seed,
        solver=resolve_solver(solver_spec),
    )
    return SweepPoint(value=value, aoc=episode_aoc(result), peak_kw=result.realized_peak_kw)


def _run_jobs(jobs: List[tuple], workers: int) -> List[SweepPoint]:
    if workers <= 1 or len(jobs) <= 1:
        return [_episode_point(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_episode_point, jobs))


def sweep_capacity(
    scenario: Scenario,
    capacities: Sequence[float],
    strategy: StrategyKind = StrategyKind.COORDINATED_WITH_ESS,
    seed: int = 0,
    solver_spec: str = "builtin",
    workers: Optional[int] = None,
    horizon_days: int = 1,
    threshold: Optional[float] = None,
) -> SweepCurve:
    """One episode per storage capacity, all on the same seed.

    Power ratings are kept; a capacity of 0 removes the storage.
    """
    workers = workers or settings.sweep_workers
    jobs = [
        (scenario.with_ess(capacity_kwh=float(c)), strategy, float(c), seed, solver_spec, horizon_days)
        for c in capacities
    ]
    points = _run_jobs(jobs, workers)
    knee = find_knee([p.value for p in points], [p.aoc for p in points], threshold)
    logger.info("Capacity sweep finished", points=len(points), knee=knee, strategy=strategy.value)
    return SweepCurve(parameter="capacity_kwh", strategy=strategy, points=tuple(points), knee=knee)


def sweep_price(
    scenario: Scenario,
    prices: Sequence[float],
    strategy: StrategyKind = StrategyKind.COORDINATED_WITH_ESS,
    seed: int = 0,
    solver_spec: str = "builtin",
    workers: Optional[int] = None,
    horizon_days: int = 1,
) -> SweepCurve:
    """One episode per storage unit price, all on the same seed."""
    workers = workers or settings.sweep_workers
    jobs = [
        (scenario.with_cost(ess_unit_price=float(p)), strategy, float(p), seed, solver_spec, horizon_days)
        for p in prices
    ]
    points = _run_jobs(jobs, workers)
    logger.info("Price sweep finished", points=len(points), strategy=strategy.value)
    return SweepCurve(parameter="ess_price", strategy=strategy, points=tuple(points))


def command_frame(result: EpisodeResult) -> pd.DataFrame:
    """Executed command log: one row per interval, one column per pile."""
    rows = []
    for c in result.commands:
        row = {"interval": c.interval, "clock": _clock(c.clock_minutes)}
        row.update({f"pile_{m}": state for m, state in enumerate(c.pile_state)})
        row.update(
            {
                "ess_charge_kw": c.ess_charge_kw,
                "ess_discharge_kw": c.ess_discharge_kw,
                "ess_soc": c.ess_soc,
                "total_load_kw": c.total_load_kw,
                "price": c.price,
                "plan_window_start": c.plan_window_start,
                "fallback": c.fallback,
            }
        )
        rows.append(row)
    return pd.DataFrame(rows)


def _clock(minutes: float) -> str:
    total = int(round(minutes))
    return f"{total // 60:02d}:{total % 60:02d}"


def episode_summary(result: EpisodeResult) -> dict:
    costs = result.costs
    return {
        "label": result.label,
        "strategy": result.strategy.value,
        "case_fingerprint": result.case_fingerprint,
        "ess_price": result.ess_price,
        "ess_capacity_kwh": result.ess_capacity_kwh,
        "horizon_days": result.horizon_days,
        "epc": str(costs.epc),
        "essc": str(costs.essc),
        "ecc": str(costs.ecc),
        "window_total": str(costs.window_total),
        "aoc": str(costs.annualized_total),
        "includes_other_loads": costs.includes_other_loads,
        "realized_peak_kw": result.realized_peak_kw,
        "shortfalls": [s.model_dump() for s in result.shortfalls],
        "degradations": [d.model_dump() for d in result.degradations],
        "low_soc_events": [e.model_dump() for e in result.low_soc_events],
        "solve_count": result.solve_count,
    }


def write_episode(result: EpisodeResult, out_dir: PathLike) -> List[Path]:
    """Write ``commands.csv``, ``summary.json``, ``episode.json``, ``timing.json`` and the plot-data CSVs.

    ``episode.json`` holds the full result and is what ``compare`` reads back.
    Solve times go to ``timing.json`` only, so every other file repeats byte
    for byte under the same seed and configuration.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    commands = out / "commands.csv"
    command_frame(result).to_csv(commands, index=False)
    summary = out / "summary.json"
    summary.write_text(json.dumps(episode_summary(result), indent=2))
    episode = out / "episode.json"
    episode.write_text(result.model_dump_json(indent=2))
    timing = out / "timing.json"
    timing.write_text(
        json.dumps({"solve_count": result.solve_count, "mean_solve_seconds": result.mean_solve_seconds}, indent=2)
    )
    return [commands, summary, episode, timing] + emit_plot_data(result, out)


def read_episode(path: PathLike) -> EpisodeResult:
    """Load a run written by ``write_episode`` (directory or ``episode.json``).

    The mean solve time is restored from ``timing.json`` when it sits next to
    the episode file.
    """
    source = Path(path)
    if source.is_dir():
        source = source / "episode.json"
    result = EpisodeResult.model_validate_json(source.read_text())
    timing = source.parent / "timing.json"
    if timing.exists():
        seconds = json.loads(timing.read_text()).get("mean_solve_seconds", 0.0)
        result = result.model_copy(update={"mean_solve_seconds": float(seconds)})
    return result


def emit_plot_data(result: EpisodeResult, out_dir: PathLike) -> List[Path]:
    """Load, storage SOC and storage power series with tariff-band labels.

    Returns:
        Paths of ``load_profile.csv``, ``ess_soc.csv`` and ``ess_power.csv``
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    commands = result.commands
    bands = band_labels([c.price for c in commands])
    base = pd.DataFrame(
        {
            "interval": [c.interval for c in commands],
            "clock": [_clock(c.clock_minutes) for c in commands],
            "band": bands,
        }
    )
    load = base.assign(
        peb_kw=[c.peb_kw for c in commands],
        ess_net_kw=[c.ess_charge_kw - c.ess_discharge_kw for c in commands],
        other_load_kw=[c.other_load_kw for c in commands],
        total_load_kw=[c.total_load_kw for c in commands],
        price=[c.price for c in commands],
    )
    soc = base.assign(ess_soc=[c.ess_soc for c in commands])
    power = base.assign(
        ess_charge_kw=[c.ess_charge_kw for c in commands],
        ess_discharge_kw=[c.ess_discharge_kw for c in commands],
    )
    paths = []
    for name, frame in (("load_profile.csv", load), ("ess_soc.csv", soc), ("ess_power.csv", power)):
        path = out / name
        frame.to_csv(path, index=False)
        paths.append(path)
    logger.info("Plot data written", directory=str(out), rows=len(base))
    return paths
