import json

import numpy as np
import pytest

from esta.cli import (
    CSV_COLUMNS, EXIT_ACCURACY, EXIT_CHECK, EXIT_OK, EXIT_USAGE, emit_results, main,
)
from esta.config import RunConfig, config_from_mapping, parse_config
from esta.exceptions import ConfigError
from esta.experiments import SweepResult, SweepRow, sweep_tf


# -- configuration ---------------------------------------------------------

def test_empty_config_gives_documented_transport_defaults():
    config = config_from_mapping({"case": "single_transport"})
    assert config.a == 1e5
    assert config.d == 1562.0
    assert config.n_modes == 1
    assert config.tf_values().size == 12


def test_two_level_defaults_scale_with_carrier():
    base = RunConfig(case="two_level")
    fast = RunConfig(case="two_level", omega_carrier=2.0)
    assert np.allclose(fast.tf_values(), base.tf_values() / 2)


def test_negative_a_names_key():
    with pytest.raises(ConfigError, match=r"config\.a"):
        config_from_mapping({"a": -1.0})


@pytest.mark.parametrize("mapping, key", [
    ({"colour": 1}, "colour"),
    ({"n_modes": 1.5}, "n_modes"),
    ({"rel_points": 100}, "rel_points"),
    ({"tf_grid": [3.0, 2.0]}, "tf_grid"),
    ({"frame": "rotating"}, "frame"),
    ({"tf_min": 5.0, "tf_max": 4.0}, "tf_max"),
])
def test_invalid_settings_name_key(mapping, key):
    with pytest.raises(ConfigError, match=key):
        config_from_mapping(mapping)


def test_single_point_grid_is_valid():
    config = config_from_mapping({"case": "two_level", "tf_steps": 1, "tf_min": 20.0})
    assert config.tf_values().tolist() == [20.0]


def test_yaml_file_and_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("case: single_transport\na: 1e4\nd: 100\ntf_grid: [10, 20]\n")
    config = parse_config(path, {"n_modes": 2, "out": None})
    assert config.a == 1e4 and config.d == 100.0
    assert config.n_modes == 2
    assert config.tf_values().tolist() == [10.0, 20.0]


def test_yaml_errors_name_file_and_key(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("case: two_level\nspeed: 3\n")
    with pytest.raises(ConfigError, match=r"bad\.yaml\.speed"):
        parse_config(path)


# -- output ----------------------------------------------------------------

@pytest.fixture(scope="module")
def small_sweep():
    config = RunConfig(case="two_level", tf_grid=[19.0, 25.0, 40.0])
    return config, sweep_tf(config)


def test_csv_header_and_row_count(small_sweep, tmp_path):
    config, sweep = small_sweep
    csv_path, sidecar = emit_results(sweep, "csv", tmp_path / "out.csv", config)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) - 1 == len(config.tf_values())
    # 17 significant digits reproduce the floats exactly
    values = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert np.array_equal(values[:, 1], sweep.column("F_sta"))
    assert sidecar.suffix == ".json"


def test_sidecar_round_trips_config(small_sweep, tmp_path):
    config, sweep = small_sweep
    _, sidecar = emit_results(sweep, "csv", tmp_path / "out.csv", config, {"sweep_seconds": 1.0})
    doc = json.loads(sidecar.read_text())
    assert config_from_mapping(doc["config"]) == config
    assert [r["epsilon"] for r in doc["rows"]] == [r.epsilon for r in sweep.rows]
    assert doc["version"] and doc["timings"]["sweep_seconds"] == 1.0


def test_json_format_writes_single_file(small_sweep, tmp_path):
    config, sweep = small_sweep
    written = emit_results(sweep, "json", tmp_path / "out.json", config)
    assert written == [tmp_path / "out.json"]
    assert len(json.loads(written[0].read_text())["rows"]) == 3


def test_nan_rows_serialize_as_null(tmp_path):
    sweep = SweepResult([SweepRow(1.0, error="AccuracyError: x")], {})
    (path,) = emit_results(sweep, "json", tmp_path / "out.json", RunConfig(case="two_level"))
    row = json.loads(path.read_text())["rows"][0]
    assert row["F_sta"] is None and row["error"].startswith("AccuracyError")


def test_unwritable_path_names_path(small_sweep, tmp_path):
    config, sweep = small_sweep
    with pytest.raises(OSError, match="missing"):
        emit_results(sweep, "csv", tmp_path / "missing" / "out.csv", config)


def test_csv_bytes_are_deterministic(tmp_path):
    args = ["sweep", "--case", "two_level", "--tf-min", "19", "--tf-max", "40", "--tf-steps", "3"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(first)]) == EXIT_OK
    assert main(args + ["--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


# -- commands and exit codes -------------------------------------------------

def test_correct_prints_vectors(capsys):
    assert main(["correct", "--case", "single_transport", "--tf", "20"]) == EXIT_OK
    out = capsys.readouterr().out
    for label in ("lambda0", "epsilon", "lambda_s", "fidelity_estimate"):
        assert label in out


def test_simulate_prints_one_row(capsys):
    assert main(["simulate", "--case", "two_level", "--tf", "25"]) == EXIT_OK
    header, row = capsys.readouterr().out.strip().splitlines()
    assert header.split(",") == list(CSV_COLUMNS)
    assert float(row.split(",")[0]) == 25.0


def test_threshold_command(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("case: two_level\ntf_grid: [40, 60, 80]\nthreshold_level: 0.5\n")
    assert main(["threshold", "--config", str(cfg)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "t_0.5(STA) = 40" in out and "t_0.5(eSTA) = 40" in out


def test_usage_errors_exit_one(capsys):
    assert main(["sweep", "--case", "three_level"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(["correct", "--case", "two_level", "--tf-steps", "0"]) == EXIT_USAGE
    assert "tf_steps" in capsys.readouterr().err


def test_accuracy_failure_exits_two(monkeypatch):
    from esta import cli
    from esta.exceptions import AccuracyError

    def fail(*args, **kwargs):
        raise AccuracyError("forced")

    monkeypatch.setattr(cli, "run_case", fail)
    assert main(["simulate", "--case", "two_level", "--tf", "20"]) == EXIT_ACCURACY


def test_failed_check_exits_three(monkeypatch, capsys):
    from esta import validation

    failing = validation.Check("forced", False, 1.0, 0.0)
    monkeypatch.setattr(validation, "run_checks", lambda level: [failing])
    assert main(["validate"]) == EXIT_CHECK
    assert "0/1 checks passed" in capsys.readouterr().out


def test_help_exits_zero(capsys):
    assert main(["--help"]) == EXIT_OK
