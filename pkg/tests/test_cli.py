"""CLI surface: exit codes, scenario loading, CSV schema and determinism."""

import csv
import json

import pytest

from relaysim.cli import (
    CSV_COLUMNS,
    EXIT_INVALID,
    EXIT_IO,
    EXIT_OK,
    EXIT_UNKNOWN_FIGURE,
    main,
)
from relaysim.model import ScenarioConfig, Strategy, default_collision_params, default_mpr_topology


@pytest.fixture
def coll_scenario(tmp_path):
    cfg = ScenarioConfig(
        channel="collision",
        params=default_collision_params(2),
        strategy=Strategy.DOMINANT_S1,
        horizon_slots=5_000,
        warmup_slots=500,
        seed=11,
        replications=2,
    )
    path = tmp_path / "scenario.json"
    path.write_text(cfg.to_json())
    return path


@pytest.fixture
def mpr_scenario(tmp_path):
    cfg = ScenarioConfig(
        channel="mpr",
        params=default_mpr_topology(3, gamma=1.2),
        strategy=Strategy.TWO_RELAY_SIMPLE,
        horizon_slots=5_000,
        warmup_slots=500,
        seed=11,
        replications=2,
    )
    path = tmp_path / "mpr.json"
    path.write_text(cfg.to_json())
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_analyze_prints_closed_forms(coll_scenario, capsys):
    assert main(["analyze", str(coll_scenario)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "q_r1_min" in out and "0.215686" in out
    assert "lambda_r2_empty_queue" in out and "0.020883" in out


def test_analyze_mpr_links(mpr_scenario, capsys):
    assert main(["analyze", str(mpr_scenario)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "u1_to_r1" in out and "u1_to_d" in out


def test_analyze_csv_export(coll_scenario, tmp_path):
    out = tmp_path / "analysis.csv"
    assert main(["analyze", str(coll_scenario), "--csv", str(out)]) == EXIT_OK
    rows = read_rows(out)
    assert rows[0] == CSV_COLUMNS
    metrics = {r[4] for r in rows[1:]}
    assert {"q_r1_min", "lambda_r2", "throughput_upper_user1"} <= metrics


def test_missing_scenario_is_io_error(capsys):
    assert main(["analyze", "/nonexistent/scenario.json"]) == EXIT_IO
    assert "cannot read" in capsys.readouterr().err


def test_malformed_json_is_invalid(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["analyze", str(bad)]) == EXIT_INVALID
    assert "malformed" in capsys.readouterr().err


def test_validation_failure_reports_paths(tmp_path, capsys):
    cfg = ScenarioConfig(
        channel="collision",
        params=default_collision_params(2),
        strategy=Strategy.TWO_RELAY_SIMPLE,
        horizon_slots=100,
        warmup_slots=0,
        seed=1,
        replications=1,
    )
    d = cfg.to_dict()
    d["params"]["q_user"][0] = 2.0
    path = tmp_path / "bad_params.json"
    path.write_text(json.dumps(d))
    assert main(["analyze", str(path)]) == EXIT_INVALID
    assert "params.q_user[0]" in capsys.readouterr().err


def test_simulate_writes_schema_and_is_byte_deterministic(coll_scenario, tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    args = ["simulate", str(coll_scenario), "--slots", "4000", "--reps", "2", "--seed", "3"]
    assert main(args + ["--out", str(out1)]) == EXIT_OK
    assert main(args + ["--out", str(out2)]) == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()
    rows = read_rows(out1)
    assert rows[0] == CSV_COLUMNS
    metrics = [r[4] for r in rows[1:]]
    assert "aggregate_throughput" in metrics and "p_empty_r2" in metrics
    for r in rows[1:]:
        assert r[0] == "collision" and r[7] == "3" and r[8] == "4000" and r[9] == "2"


def test_simulate_seed_changes_bytes(coll_scenario, tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    base = ["simulate", str(coll_scenario), "--slots", "4000", "--reps", "2"]
    assert main(base + ["--seed", "3", "--out", str(out1)]) == EXIT_OK
    assert main(base + ["--seed", "4", "--out", str(out2)]) == EXIT_OK
    assert out1.read_bytes() != out2.read_bytes()


def test_simulate_rejects_zero_reps(coll_scenario, tmp_path, capsys):
    code = main(
        ["simulate", str(coll_scenario), "--reps", "0", "--out", str(tmp_path / "x.csv")]
    )
    assert code == EXIT_INVALID
    assert "replications" in capsys.readouterr().err


def test_simulate_unwritable_output(coll_scenario):
    code = main(["simulate", str(coll_scenario), "--slots", "200", "--out", "/nonexistent/dir/x.csv"])
    assert code == EXIT_IO


def test_unknown_figure_id(tmp_path, capsys):
    assert main(["figure", "Nonsense", "--out", str(tmp_path)]) == EXIT_UNKNOWN_FIGURE
    assert "unknown figure id" in capsys.readouterr().err


def test_stability_region_figure(tmp_path):
    assert main(["figure", "StabilityRegion", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_rows(tmp_path / "StabilityRegion.csv")
    assert rows[0] == ["lambda_r1", "lambda_r2", "region_id"]
    regions = {r[2] for r in rows[1:]}
    assert regions == {f"N{n}_s{s}" for n in (2, 4, 8) for s in (1, 2)}
    # 200-point polylines for each of the six boundaries
    assert len(rows) - 1 == 6 * 200


def test_bounds_figure_small(tmp_path):
    assert main(
        ["figure", "SimpleBounds", "--out", str(tmp_path), "--slots", "2000", "--reps", "1"]
    ) == EXIT_OK
    rows = read_rows(tmp_path / "SimpleBounds.csv")
    assert rows[0] == CSV_COLUMNS
    metrics = {r[4] for r in rows[1:]}
    assert {"bound_upper", "bound_lower", "throughput_per_user"} <= metrics
    sizes = {int(r[2]) for r in rows[1:]}
    assert sizes == {2, 4, 6, 8, 10, 12, 14}


def test_mpr_figure_small(tmp_path):
    assert main(
        ["figure", "MprAggregate", "--out", str(tmp_path), "--slots", "300", "--reps", "1"]
    ) == EXIT_OK
    rows = read_rows(tmp_path / "MprAggregate.csv")
    gammas = {r[3] for r in rows[1:]}
    assert gammas == {"0.2", "1.2", "2.5"}
    strategies = {r[1] for r in rows[1:]}
    assert "two_relay_smaller_queue" in strategies and "no_relay" in strategies
