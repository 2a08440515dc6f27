"""Observation files, experiment configs and end-to-end runs written to a run directory."""

import json

import numpy as np
import pytest
import yaml

from src.errors import ConfigError, DataError
from src.models.dataset import log_returns, read_observations, read_truth, truth_path, write_observations
from src.models.schema import ExperimentConfig, RunSummary
from src.pipeline import load_summary, run, simulate

LG_MODEL = {
    "name": "lg",
    "priors": {"sigma": {"dist": "fixed", "value": 1.0}, "tau": {"dist": "fixed", "value": 0.5}},
    "true_theta": {"rho": 0.9},
}
SMALL_SMC2 = {"n_theta": 20, "n_x": 8, "n_x_max": 32}


def write_config(tmp_path, name="exp.yml", **sections):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(sections))
    return path


def simulated_lg(tmp_path, T=10, seed=1):
    data = tmp_path / "lg.csv"
    cfg = write_config(tmp_path, "sim.yml", model=LG_MODEL, simulate={"T": T}, data={"path": str(data)}, seed=seed)
    simulate(ExperimentConfig.load(cfg, simulate=True))
    return data


def read_diagnostics(run_dir):
    return [json.loads(line) for line in (run_dir / "diagnostics.jsonl").read_text().splitlines()]


# =============================================================================
# Observation files
# =============================================================================


def test_observations_keep_missing_rows(tmp_path):
    ys = np.array([[1.5, 2.5], [np.nan, np.nan], [0.1, 0.2]])
    path = write_observations(tmp_path / "obs.csv", ys)
    assert path.read_text().splitlines()[:3] == ["t,y1,y2", "1,1.5,2.5", "2,,"]
    back = read_observations(path)
    assert back.shape == (3, 2)
    assert np.all(np.isnan(back[1]))
    np.testing.assert_array_equal(back[[0, 2]], ys[[0, 2]])


def test_header_only_file_is_empty_series(tmp_path):
    path = write_observations(tmp_path / "empty.csv", np.empty((0, 1)), obs_dim=1)
    assert path.read_text() == "t,y1\n"
    assert read_observations(path).shape == (0, 1)


@pytest.mark.parametrize("content", ["", "a,b\n1,2\n", "t,y1\n1,2,3\n"])
def test_malformed_files(tmp_path, content):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(DataError):
        read_observations(path)


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        read_observations(tmp_path / "nope.csv")


def test_log_returns():
    out = log_returns([100.0, 110.0, 99.0])
    np.testing.assert_allclose(out[:, 0], 10**2.5 * np.log([1.1, 0.9]))
    with pytest.raises(DataError):
        log_returns([100.0, -1.0])


@pytest.mark.parametrize("content", ["not json", '{"theta": "rho"}'])
def test_malformed_truth_sidecar(tmp_path, content):
    csv = write_observations(tmp_path / "obs.csv", np.zeros((2, 1)))
    truth_path(csv).write_text(content)
    with pytest.raises(DataError):
        read_truth(csv)


# =============================================================================
# Config
# =============================================================================


def test_config_errors(tmp_path):
    data = simulated_lg(tmp_path)
    bad_gamma = write_config(tmp_path, model=LG_MODEL, data={"path": str(data)}, smc2={"ess_threshold": 1.5})
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad_gamma)

    unknown = write_config(tmp_path, model=LG_MODEL, data={"path": str(data)}, particles=10)
    with pytest.raises(ConfigError):
        ExperimentConfig.load(unknown)

    no_data = write_config(tmp_path, model=LG_MODEL, data={"path": str(tmp_path / "missing.csv")})
    with pytest.raises(ConfigError):
        ExperimentConfig.load(no_data)
    assert ExperimentConfig.load(no_data, simulate=True).model.name == "lg"

    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "absent.yml")


def test_overrides_replace_top_level_keys(tmp_path):
    data = simulated_lg(tmp_path)
    cfg = write_config(tmp_path, model=LG_MODEL, data={"path": str(data)}, seed=1)
    loaded = ExperimentConfig.load(cfg, seed=42, threads=None)
    assert loaded.seed == 42
    assert loaded.threads >= 1


# =============================================================================
# Simulation
# =============================================================================


def test_simulation_is_reproducible(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert simulated_lg(a, T=25, seed=4).read_bytes() == simulated_lg(b, T=25, seed=4).read_bytes()
    truth = read_truth(a / "lg.csv")
    assert truth.theta == {"rho": 0.9, "sigma": 1.0, "tau": 0.5}
    assert len(truth.states) == 25


def test_zero_length_simulation(tmp_path):
    data = simulated_lg(tmp_path, T=0)
    assert data.read_text() == "t,y1\n"
    assert read_truth(data).states == []


def test_simulated_missing_year(tmp_path):
    data = tmp_path / "ath.csv"
    cfg = write_config(
        tmp_path,
        model={"name": "athletics", "true_theta": {"nu": 1.0, "xi": -0.2, "sigma": 4.0}},
        simulate={"T": 6, "missing": [3]},
        data={"path": str(data)},
    )
    simulate(ExperimentConfig.load(cfg, simulate=True))
    ys = read_observations(data)
    assert ys.shape == (6, 2)
    assert np.all(np.isnan(ys[2]))
    present = np.delete(ys, 2, axis=0)
    assert np.all(present[:, 0] < present[:, 1])


# =============================================================================
# Runs
# =============================================================================


def test_kalman_run(tmp_path):
    data = simulated_lg(tmp_path)
    out = tmp_path / "run"
    cfg = write_config(tmp_path, model=LG_MODEL, algorithm="kalman", theta={"rho": 0.9},
                       data={"path": str(data)}, output_dir=str(out))
    summary = run(ExperimentConfig.load(cfg))

    records = read_diagnostics(out)
    assert [r["t"] for r in records] == list(range(1, 11))
    assert "ess" not in records[0]
    assert summary.log_evidence == pytest.approx(records[-1]["cum_log_evidence"])
    assert sum(r["log_Lhat_t"] for r in records) == pytest.approx(summary.log_evidence)
    assert load_summary(out) == summary


def test_kalman_needs_linear_model(tmp_path):
    data = simulated_lg(tmp_path)
    cfg = write_config(tmp_path, model={"name": "sv1"}, algorithm="kalman", data={"path": str(data)},
                       theta={"mu": 0, "beta": 0, "xi": 0.5, "omega2": 0.1, "lam": 0.1}, output_dir=str(tmp_path / "r"))
    with pytest.raises(ConfigError):
        run(ExperimentConfig.load(cfg))


def test_smc2_run_artifacts(tmp_path):
    data = simulated_lg(tmp_path)
    out = tmp_path / "run"
    cfg = write_config(tmp_path, model=LG_MODEL, smc2=SMALL_SMC2, checkpoints=[5], data={"path": str(data)},
                       output_dir=str(out), seed=3)
    summary = run(ExperimentConfig.load(cfg))

    records = read_diagnostics(out)
    assert len(records) == 10
    assert summary.log_evidence == pytest.approx(records[-1]["cum_log_evidence"], abs=1e-12)
    assert summary.final_n_x == records[-1]["n_x"]
    assert "5" in summary.checkpoints and "rho" in summary.posterior

    checkpoint = out / "checkpoints" / "particles_t5.csv"
    assert checkpoint.read_text().splitlines()[0] == "log_weight,rho,x"
    assert np.loadtxt(checkpoint, delimiter=",", skiprows=1).shape == (20, 3)
    assert RunSummary.model_validate_json((out / "summary.json").read_text()).T == 10


def test_run_is_deterministic_across_threads(tmp_path):
    data = simulated_lg(tmp_path)

    def diagnostics(threads):
        out = tmp_path / f"run{threads}"
        cfg = write_config(tmp_path, f"t{threads}.yml", model=LG_MODEL, smc2=SMALL_SMC2, data={"path": str(data)},
                           output_dir=str(out), threads=threads, seed=5)
        run(ExperimentConfig.load(cfg))
        return [{k: v for k, v in r.items() if k != "wall_ms"} for r in read_diagnostics(out)]

    assert diagnostics(1) == diagnostics(3)


@pytest.mark.parametrize("algorithm", ["pf", "ibis", "pmmh"])
def test_other_algorithms(tmp_path, algorithm):
    data = simulated_lg(tmp_path)
    out = tmp_path / algorithm
    cfg = write_config(tmp_path, model=LG_MODEL, algorithm=algorithm, theta={"rho": 0.9}, smc2=SMALL_SMC2,
                       pmmh={"n_x": 8, "n_iter": 40}, data={"path": str(data)}, output_dir=str(out))
    summary = run(ExperimentConfig.load(cfg))
    if algorithm == "pmmh":
        header = (out / "chain.csv").read_text().splitlines()[0]
        assert header == "rho,log_zhat,accepted"
        assert 0.0 <= summary.acceptance_rate <= 1.0
    else:
        assert np.isfinite(summary.log_evidence)
        assert len(read_diagnostics(out)) == 10


@pytest.mark.parametrize("store", [True, False])
def test_athletics_record_probabilities(tmp_path, store):
    data = tmp_path / "ath.csv"
    model = {
        "name": "athletics",
        "priors": {
            "nu": {"dist": "exponential", "rate": 1.0},
            "xi": {"dist": "exponential", "rate": 5.0, "reflect": True},
            "sigma": {"dist": "exponential", "rate": 0.25},
        },
        "true_theta": {"nu": 1.0, "xi": -0.2, "sigma": 4.0},
    }
    sim = write_config(tmp_path, "sim.yml", model=model, simulate={"T": 6, "missing": [3]}, data={"path": str(data)})
    simulate(ExperimentConfig.load(sim, simulate=True))

    out = tmp_path / "run"
    cfg = write_config(
        tmp_path, model=model, smc2={"n_theta": 60, "n_x": 16, "n_x_max": 32, "trajectory_store": store},
        records={"thresholds": [505.0, 515.0], "at": 3}, data={"path": str(data)}, output_dir=str(out),
    )
    run(ExperimentConfig.load(cfg))

    records = json.loads((out / "records.json").read_text())
    p_low, p_high = records["probabilities"]
    assert 0.0 <= p_low <= p_high <= 1.0
    assert records["conditional"] * p_high == pytest.approx(p_low, rel=1e-12)
    assert len(records["per_theta"]) == 60
