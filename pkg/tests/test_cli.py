import json

import pytest

import main
from src.domain import ChargeSchedule
from src.milp import SolveStatus, read_mps, solve_milp
from src.models import WindowInput, build_model_a
from src.scenario import load_scenario, save_scenario

from conftest import make_scenario, parking


@pytest.fixture
def one_bus_file(tmp_path, one_bus_scenario):
    path = tmp_path / "one_bus.json"
    save_scenario(one_bus_scenario, path)
    return path


@pytest.fixture
def daily_file(tmp_path, daily_scenario):
    path = tmp_path / "daily.json"
    save_scenario(daily_scenario, path)
    return path


def run(capsys, *argv):
    code = main.main(list(argv) + ["--log-level", "WARNING"] if argv[0] != "schema" else list(argv))
    return code, capsys.readouterr().out


def test_schema(capsys):
    code, out = run(capsys, "schema")
    assert code == main.EXIT_OK
    assert "timetable" in json.loads(out)["properties"]


@pytest.mark.parametrize("command", ["paper-case", "case-study"])
def test_case_study_writes_a_loadable_scenario(capsys, tmp_path, command):
    path = tmp_path / "desk.json"
    code, _ = run(capsys, command, "--desk-scale", "4", "--dt-min", "15", "--out", str(path))
    assert code == main.EXIT_OK
    scenario = load_scenario(path)
    assert scenario.fleet.bus_count == 4
    assert scenario.grid.interval_count == 96


def test_solve_model_a(capsys, tmp_path, one_bus_file):
    out = tmp_path / "solved"
    code, stdout = run(capsys, "solve", "--scenario", str(one_bus_file), "--model", "A", "--out", str(out))
    assert code == main.EXIT_OK
    report = json.loads(stdout)
    assert report["status"] == "optimal"
    assert report["peak_kw"] == pytest.approx(217.0)
    schedule = ChargeSchedule.model_validate_json((out / "schedule.json").read_text())
    assert sum(schedule.peb_on_charge[0]) == 1
    assert (out / "costs.json").exists()


def test_solve_heuristic(capsys, daily_file):
    code, stdout = run(capsys, "solve", "--scenario", str(daily_file), "--model", "heuristic")
    assert code == main.EXIT_OK
    report = json.loads(stdout)
    assert report["status"] == "heuristic"


def test_infeasible_window(capsys, tmp_path):
    path = tmp_path / "short.json"
    save_scenario(make_scenario([parking(0, 0, 2, soc=0.25)], interval_minutes=5), path)
    code, _ = run(capsys, "solve", "--scenario", str(path), "--model", "A")
    assert code == main.EXIT_INFEASIBLE


def test_missing_and_malformed_input(capsys, tmp_path):
    code, _ = run(capsys, "solve", "--scenario", str(tmp_path / "absent.json"))
    assert code == main.EXIT_INVALID
    bad = tmp_path / "bad.json"
    bad.write_text('{"grid": {"interval_count": 0, "interval_minutes": 5}}')
    code, _ = run(capsys, "solve", "--scenario", str(bad))
    assert code == main.EXIT_INVALID


def test_unavailable_external_solver(capsys, one_bus_file):
    code, _ = run(
        capsys, "solve", "--scenario", str(one_bus_file), "--model", "A", "--solver", "external:no-such-solver-here"
    )
    assert code == main.EXIT_UNAVAILABLE


def test_solver_limit_still_writes_the_incumbent(capsys, tmp_path, monkeypatch, one_bus_file):
    def limited(instance, config=None):
        return solve_milp(instance, config=config).model_copy(update={"status": SolveStatus.GAP_LIMIT})

    monkeypatch.setattr(main, "resolve_solver", lambda spec: limited)
    out = tmp_path / "limited"
    code, stdout = run(capsys, "solve", "--scenario", str(one_bus_file), "--model", "A", "--out", str(out))
    assert code == main.EXIT_LIMIT
    assert json.loads(stdout)["status"] == "gap_limit"
    assert (out / "schedule.json").exists()


def test_unknown_solver_spec_is_invalid(capsys, one_bus_file):
    code, _ = run(capsys, "solve", "--scenario", str(one_bus_file), "--solver", "gurobi")
    assert code == main.EXIT_INVALID


def test_export_mps_with_dump(capsys, tmp_path, one_bus_file, one_bus_scenario):
    out = tmp_path / "model.mps"
    code, stdout = run(capsys, "export-mps", "--scenario", str(one_bus_file), "--model", "A", "--out", str(out), "--dump")
    assert code == main.EXIT_OK
    instance, _ = build_model_a(WindowInput.from_scenario(one_bus_scenario))
    assert read_mps(out.read_text()).variable_count == instance.variable_count
    dump = tmp_path / "model.rows.txt"
    assert json.loads(stdout)["dump"] == str(dump)
    assert dump.read_text().startswith("eq")


def test_simulate_then_compare(capsys, tmp_path, daily_file):
    metrics_file = tmp_path / "metrics.prom"
    runs = []
    for strategy in ("uncoordinated_with_ess", "coordinated_with_ess"):
        out = tmp_path / strategy
        code, stdout = run(
            capsys,
            "simulate",
            "--scenario",
            str(daily_file),
            "--strategy",
            strategy,
            "--out",
            str(out),
            "--metrics-file",
            str(metrics_file),
        )
        assert code == main.EXIT_OK
        assert json.loads(stdout)["label"] == strategy
        assert (out / "episode.json").exists()
        assert (out / "timing.json").exists()
        runs.append(str(out))
    assert "pebfcs_solves_total" in metrics_file.read_text()

    code, stdout = run(capsys, "compare", *runs, "--baseline", "uncoordinated_with_ess")
    assert code == main.EXIT_OK
    header, *rows = stdout.strip().splitlines()
    assert header.split(",")[:4] == ["label", "ess_price", "aoc_baseline", "aoc"]
    assert len(rows) == 2


def test_bad_number_list_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main.main(["sweep-capacity", "--capacities", "1,two"])
    assert info.value.code == 2
