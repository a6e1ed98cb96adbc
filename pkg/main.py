"""Command-line entry point of the charging-station scheduler.

Exit codes: 0 success, 2 invalid input, 3 infeasible, 4 solver limit hit
(the incumbent is still written), 5 external solver unavailable.
"""

import argparse
import json
import signal
import sys
from pathlib import Path
from typing import List, Optional

import structlog
from pydantic import ValidationError

from src import metrics
from src.config import settings
from src.controller import StrategyKind, run_episode, uncoordinated_profile
from src.errors import (
    DispatchInfeasibleError,
    DomainError,
    InfeasibleBoundsError,
    InfeasibleModelError,
    PebfcsError,
    SolverUnavailableError,
)
from src.heuristic import heuristic_strategy
from src.milp import SolverConfig, SolveStatus, constraint_dump, resolve_solver, write_mps
from src.models import (
    WindowInput,
    build_model_a,
    build_model_a_relaxed,
    build_model_b,
    build_model_c,
    extract_schedule,
    window_costs,
)
from src.reporting import compare_runs, read_episode, sweep_capacity, sweep_price, write_episode
from src.scenario import (
    CASE_ESS_PRICES,
    CaseStudyParams,
    desk_scale_params,
    generate,
    load_scenario,
    save_scenario,
    scenario_schema,
)
from src.utils.logging import setup_logging

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_LIMIT = 4
EXIT_UNAVAILABLE = 5

LIMIT_STATUSES = (SolveStatus.GAP_LIMIT, SolveStatus.NODE_LIMIT)


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", type=Path, help="Scenario JSON (default: generated case study)")
    common.add_argument("--seed", type=int, default=0, help="Generator and noise seed")
    common.add_argument("--dt-min", type=float, default=5.0, help="Interval length of generated scenarios")
    common.add_argument("--intervals", type=int, help="Interval count of generated scenarios")
    common.add_argument("--desk-scale", type=int, metavar="BUSES", help="Generate a thinned station")
    common.add_argument("--solver", default="builtin", help="builtin or external:<command>")
    common.add_argument("--out", type=Path, help="Output file or directory")
    common.add_argument("--time-limit", type=float, help="Seconds per solve")
    common.add_argument("--node-limit", type=int, help="Branch-and-bound nodes per solve")
    common.add_argument("--log-level", default=None, help="Logging level")

    episode = argparse.ArgumentParser(add_help=False)
    episode.add_argument(
        "--strategy",
        choices=[s.value for s in StrategyKind],
        default=StrategyKind.COORDINATED_WITH_ESS.value,
    )
    episode.add_argument("--horizon-days", type=int, default=1)
    episode.add_argument("--noise", type=float, help="Trip ΔSOC noise as a fraction of the mean")
    episode.add_argument("--forecast", choices=["running_mean", "timetable"])
    episode.add_argument("--workers", type=int, help="Parallel episodes in sweeps")
    episode.add_argument("--metrics-file", type=Path, help="Write Prometheus metrics here")

    parser = argparse.ArgumentParser(prog="pebfcs", description="Bus fast-charging station scheduler")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", parents=[common], help="Solve one window")
    solve.add_argument("--model", choices=["A", "B", "C", "relaxed_A", "heuristic"], default="B")

    commands.add_parser("simulate", parents=[common, episode], help="Run a rolling-horizon episode")

    capacity = commands.add_parser("sweep-capacity", parents=[common, episode], help="AOC against storage capacity")
    capacity.add_argument("--capacities", type=_floats, default=[0, 200, 400, 800, 1200, 1600])

    price = commands.add_parser("sweep-price", parents=[common, episode], help="AOC against storage price")
    price.add_argument("--prices", type=_floats, default=list(CASE_ESS_PRICES))

    compare = commands.add_parser("compare", parents=[common], help="Compare saved episodes")
    compare.add_argument("runs", nargs="+", type=Path, help="Episode directories or episode.json files")
    compare.add_argument("--baseline", help="Label of the baseline run")

    export = commands.add_parser("export-mps", parents=[common], help="Write a window model as MPS")
    export.add_argument("--model", choices=["A", "B", "C", "relaxed_A"], default="B")
    export.add_argument("--dump", action="store_true", help="Also write the constraint listing")

    commands.add_parser(
        "paper-case", aliases=["case-study"], parents=[common], help="Print the case-study scenario JSON"
    )
    commands.add_parser("schema", help="Print the scenario JSON schema")
    return parser


def _scenario(args):
    if args.scenario is not None:
        return load_scenario(args.scenario)
    if args.desk_scale:
        params = desk_scale_params(args.desk_scale, seed=args.seed, interval_minutes=args.dt_min)
    else:
        params = CaseStudyParams(seed=args.seed, interval_minutes=args.dt_min)
    if args.intervals:
        params = params.model_copy(update={"interval_count": args.intervals})
    return generate(params)


def _config(args) -> SolverConfig:
    return SolverConfig.from_settings(settings).model_copy(
        update={
            k: v
            for k, v in (("time_limit_seconds", args.time_limit), ("node_limit", args.node_limit))
            if v is not None
        }
    )


def _window_model(kind: str, win: WindowInput):
    if kind == "A":
        return build_model_a(win)
    if kind == "B":
        return build_model_b(win)
    if kind == "C":
        return build_model_c(win, uncoordinated_profile(win))
    return build_model_a_relaxed(win)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2))


def cmd_solve(args) -> int:
    scenario = _scenario(args)
    win = WindowInput.from_scenario(scenario)
    config = _config(args)
    solver = resolve_solver(args.solver)
    fixed_load = None
    if args.model == "heuristic":
        result = heuristic_strategy(win, config, solver)
        schedule, status, objective, bound = result.schedule, "heuristic", result.objective, result.relaxed_objective
    else:
        instance, varmap = _window_model(args.model, win)
        solution = solver(instance, config=config)
        if not solution.has_incumbent:
            _emit({"model": args.model, "status": solution.status.value})
            return EXIT_INFEASIBLE
        schedule = extract_schedule(solution, varmap, win)
        fixed_load = varmap.fixed_peb_load_kw
        status, objective, bound = solution.status.value, solution.objective, solution.bound
    costs = window_costs(schedule, win, fixed_load)
    _emit(
        {
            "model": args.model,
            "status": status,
            "objective": objective,
            "bound": bound,
            "peak_kw": costs.peak_kw,
            "aoc": str(costs.annualized_total),
        }
    )
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "schedule.json").write_text(schedule.model_dump_json(indent=2))
        (args.out / "costs.json").write_text(costs.model_dump_json(indent=2))
    return EXIT_LIMIT if status in {s.value for s in LIMIT_STATUSES} else EXIT_OK


def _episode_kwargs(args) -> dict:
    return {
        "horizon_days": args.horizon_days,
        "seed": args.seed,
        "solver": resolve_solver(args.solver),
        "config": _config(args),
        "noise_fraction": args.noise,
        "forecast_mode": args.forecast,
    }


def _write_metrics(args) -> None:
    if args.metrics_file:
        metrics.write_metrics(args.metrics_file)


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    result = run_episode(scenario, StrategyKind(args.strategy), **_episode_kwargs(args))
    out = args.out or Path("episode") / result.label
    write_episode(result, out)
    _emit(
        {
            "label": result.label,
            "aoc": str(result.costs.annualized_total),
            "peak_kw": result.realized_peak_kw,
            "degradations": len(result.degradations),
            "shortfalls": len(result.shortfalls),
            "out": str(out),
        }
    )
    _write_metrics(args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = _scenario(args)
    strategy = StrategyKind(args.strategy)
    common = {
        "strategy": strategy,
        "seed": args.seed,
        "solver_spec": args.solver,
        "workers": args.workers,
        "horizon_days": args.horizon_days,
    }
    if args.command == "sweep-capacity":
        curve = sweep_capacity(scenario, args.capacities, **common)
    else:
        curve = sweep_price(scenario, args.prices, **common)
    out = args.out or Path(f"{args.command}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    curve.frame().to_csv(out, index=False)
    _emit({"parameter": curve.parameter, "points": len(curve.points), "knee": curve.knee, "out": str(out)})
    _write_metrics(args)
    return EXIT_OK


def cmd_compare(args) -> int:
    results = []
    for path in args.runs:
        results.append(read_episode(path))
    table = compare_runs(results, baseline=args.baseline)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(args.out, index=False)
    print(table.to_csv(index=False), end="")
    return EXIT_OK


def cmd_export_mps(args) -> int:
    scenario = _scenario(args)
    instance, _ = _window_model(args.model, WindowInput.from_scenario(scenario))
    out = args.out or Path(f"model_{args.model}.mps")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(write_mps(instance))
    written = {"mps": str(out)}
    if args.dump:
        dump = out.with_suffix(".rows.txt")
        dump.write_text(constraint_dump(instance))
        written["dump"] = str(dump)
    _emit({"model": args.model, "variables": instance.variable_count, **written})
    return EXIT_OK


def cmd_case_study(args) -> int:
    scenario = _scenario(args)
    if args.out:
        save_scenario(scenario, args.out)
    else:
        print(scenario.model_dump_json(indent=2))
    return EXIT_OK


def cmd_schema(_args) -> int:
    print(json.dumps(scenario_schema(), indent=2))
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "sweep-capacity": cmd_sweep,
    "sweep-price": cmd_sweep,
    "compare": cmd_compare,
    "export-mps": cmd_export_mps,
    "paper-case": cmd_case_study,
    "case-study": cmd_case_study,
    "schema": cmd_schema,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(getattr(args, "log_level", None) or settings.log_level, settings.structured_logging)
    logger = structlog.get_logger()
    try:
        return COMMANDS[args.command](args)
    except SolverUnavailableError as e:
        logger.error("External solver unavailable", error=str(e))
        return EXIT_UNAVAILABLE
    except (InfeasibleModelError, DispatchInfeasibleError, InfeasibleBoundsError) as e:
        logger.error("Problem is infeasible", error=str(e))
        return EXIT_INFEASIBLE
    except (DomainError, ValidationError, OSError, ValueError) as e:
        logger.error("Invalid input", error=str(e))
        return EXIT_INVALID
    except PebfcsError as e:
        logger.error("Command failed", command=args.command, error=str(e))
        return EXIT_ERROR


def signal_handler(signum, _):
    """Handle shutdown signals gracefully."""
    logger = structlog.get_logger()
    logger.info("Received shutdown signal", signal=signum)
    sys.exit(130)


if __name__ == "__main__":
    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)
    sys.exit(main())
