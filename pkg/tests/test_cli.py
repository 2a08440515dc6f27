"""CLI commands and their exit codes."""

import pytest
import yaml
from typer.testing import CliRunner

from src.cli import app
from src.errors import (
    ConfigError,
    DataError,
    DegenerateWeightsError,
    FilterDegenerateError,
    KalmanError,
    TrajectoryNotStoredError,
    exit_code,
)

runner = CliRunner()

LG = {
    "name": "lg",
    "priors": {"sigma": {"dist": "fixed", "value": 1.0}, "tau": {"dist": "fixed", "value": 0.5}},
    "true_theta": {"rho": 0.9},
}


@pytest.fixture
def lg_config(tmp_path):
    path = tmp_path / "lg.yml"
    path.write_text(yaml.safe_dump({
        "model": LG,
        "smc2": {"n_theta": 16, "n_x": 8, "n_x_max": 16},
        "simulate": {"T": 8},
        "data": {"path": str(tmp_path / "lg.csv")},
        "output_dir": str(tmp_path / "run"),
        "seed": 2,
    }))
    return path


def test_simulate_run_summary_compare(tmp_path, lg_config):
    result = runner.invoke(app, ["simulate", "--config", str(lg_config)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "lg.csv").exists()

    result = runner.invoke(app, ["run", "--config", str(lg_config)])
    assert result.exit_code == 0, result.output
    assert "log evidence" in result.output

    result = runner.invoke(app, ["run", "--config", str(lg_config), "--seed", "3", "--output-dir", str(tmp_path / "run2")])
    assert result.exit_code == 0, result.output

    result = runner.invoke(app, ["summary", str(tmp_path / "run")])
    assert result.exit_code == 0, result.output
    assert "smc2" in result.output

    result = runner.invoke(app, ["compare", str(tmp_path / "run"), str(tmp_path / "run2")])
    assert result.exit_code == 0, result.output


def test_simulate_output_override(tmp_path, lg_config):
    target = tmp_path / "other.csv"
    result = runner.invoke(app, ["simulate", "--config", str(lg_config), "--output", str(target)])
    assert result.exit_code == 0, result.output
    assert target.read_text().startswith("t,y1\n")


def test_missing_data_is_a_config_error(lg_config):
    result = runner.invoke(app, ["run", "--config", str(lg_config)])
    assert result.exit_code == 2


def test_malformed_data_is_a_data_error(tmp_path, lg_config):
    (tmp_path / "lg.csv").write_text("a,b\n1,2\n")
    result = runner.invoke(app, ["run", "--config", str(lg_config)])
    assert result.exit_code == 3


def test_missing_run_directory(tmp_path):
    result = runner.invoke(app, ["summary", str(tmp_path / "nothing")])
    assert result.exit_code == 3


def test_entrypoint_exit_codes(tmp_path, lg_config, monkeypatch):
    from src import entrypoint

    monkeypatch.setattr(entrypoint, "CONFIG_PATH", None)
    assert entrypoint.main() == 2

    monkeypatch.setattr(entrypoint, "CONFIG_PATH", str(lg_config))
    assert entrypoint.main() == 2  # data file not simulated yet

    (tmp_path / "lg.csv").write_text("a,b\n1,2\n")
    assert entrypoint.main() == 3

    runner.invoke(app, ["simulate", "--config", str(lg_config)])
    assert entrypoint.main() == 0
    assert (tmp_path / "run" / "summary.json").exists()


@pytest.mark.parametrize("exc,code", [
    (ConfigError("bad"), 2),
    (DataError("x.csv", "unreadable"), 3),
    (DegenerateWeightsError("all zero"), 4),
    (FilterDegenerateError([0.5], 3), 4),
    (KalmanError(2, [[-1.0]]), 4),
    (TrajectoryNotStoredError("no paths"), 1),
])
def test_exit_codes_by_error_kind(exc, code):
    assert exit_code(exc)[0] == code
