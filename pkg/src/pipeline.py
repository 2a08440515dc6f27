"""Experiment runner: simulate data, run a sampler, write the run artifacts.

Shared by the CLI ``simulate`` / ``run`` commands and the batch ``entrypoint``.

A run directory holds:
  diagnostics.jsonl              one StepDiagnostics record per t
  checkpoints/particles_t<k>.csv log_weight, θ, selected state at checkpoint k
  summary.json                   RunSummary with the config echo
  records.json                   record probabilities (when configured)
  chain.csv                      PMMH samples (pmmh only)
"""

from __future__ import annotations

import json
import logging
import time
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from src.errors import ConfigError, DataError, InvalidParameterError
from src.inference.ibis import IbisState, ibis_init, ibis_step
from src.inference.pf import pf_init, pf_step
from src.inference.pmmh import pmmh_run
from src.inference.smc2 import Smc2State, maybe_rejuvenate, select_trajectories, smc2_init, smc2_step
from src.inference.smoothing import record_probabilities
from src.models import build_model
from src.models.base import StateSpaceModel
from src.models.dataset import load_data, write_observations, write_truth
from src.models.schema import ExperimentConfig, RunSummary, SimulationTruth, StepDiagnostics
from src.rng import Purpose, RngStream

log = logging.getLogger(__name__)

ProgressHook = Callable[[int, int], None]


def model_from_config(config: ExperimentConfig) -> StateSpaceModel:
    try:
        return build_model(config.model.name, config.model.priors, config.model.options)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc


def _theta(model: StateSpaceModel, values: dict[str, float], what: str) -> np.ndarray:
    try:
        return model.pack(**values)
    except InvalidParameterError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def simulate(config: ExperimentConfig, rng: Optional[RngStream] = None) -> Path:
    """Simulate T observations from the true θ; writes the CSV and its truth sidecar."""
    model = model_from_config(config)
    theta = _theta(model, config.model.true_theta, "model.true_theta")
    rng = rng or RngStream(config.seed)

    states, ys = model.simulate(theta, config.simulate.T, rng.split(Purpose.SIMULATE))
    for t in config.simulate.missing:
        ys[t - 1] = np.nan
    target = config.simulate.output or config.data.path
    path = Path(target) if target else Path(config.output_dir) / f"{model.name}.csv"

    write_observations(path, ys, model.obs_dim)
    write_truth(path, SimulationTruth(
        model=config.model.name,
        theta=model.params(theta),
        state_names=list(model.state_names),
        states=states.tolist(),
    ))
    log.info("Simulated %d steps of %s (θ=%s) -> %s", config.simulate.T, model.name, config.model.true_theta, path)
    return path


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


class RunWriter:
    """Single writer for a run directory; diagnostics are flushed per record."""

    def __init__(self, run_dir: Path):
        self.run_dir = run_dir
        try:
            (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
            self._diag = open(run_dir / "diagnostics.jsonl", "w")
        except OSError as exc:
            raise DataError(run_dir, f"cannot create run directory: {exc}") from exc

    def diagnostics(self, record: StepDiagnostics) -> None:
        self._diag.write(record.model_dump_json(exclude_none=True) + "\n")
        self._diag.flush()

    def particles(self, t: int, columns: list[str], table: np.ndarray) -> Path:
        path = self.run_dir / "checkpoints" / f"particles_t{t}.csv"
        np.savetxt(path, table, delimiter=",", fmt="%.17g", header=",".join(columns), comments="")
        return path

    def json(self, name: str, payload: str) -> Path:
        path = self.run_dir / name
        path.write_text(payload)
        return path

    def close(self) -> None:
        self._diag.close()


def _dump_smc2_checkpoint(writer: RunWriter, state: Smc2State, rng: RngStream) -> None:
    sample = select_trajectories(state, rng)
    columns = ["log_weight", *state.model.param_names, *state.model.state_names]
    table = np.column_stack([sample.log_weights, sample.thetas, sample.states])
    writer.particles(state.t, columns, table)


def _dump_ibis_checkpoint(writer: RunWriter, state: IbisState) -> None:
    columns = ["log_weight", *state.model.param_names]
    writer.particles(state.t, columns, np.column_stack([state.cloud.log_weights, state.cloud.thetas]))


# ---------------------------------------------------------------------------
# Algorithms
# ---------------------------------------------------------------------------


def _run_kalman(model, ys, config, writer, summary, progress):
    if not model.exact:
        raise ConfigError(f"algorithm 'kalman' needs a linear-Gaussian model, not {model.name!r}")
    theta = _theta(model, config.theta, "theta")
    previous = 0.0
    for k, state in enumerate(model.exact_filter(theta, ys), start=1):
        writer.diagnostics(StepDiagnostics(t=k, log_Lhat_t=state.loglik - previous, cum_log_evidence=state.loglik))
        previous = state.loglik
        if progress:
            progress(k, len(ys))
    summary.log_evidence = previous


def _run_pf(model, ys, config, writer, summary, progress, rng):
    theta = _theta(model, config.theta, "theta")
    filt = rng.split(Purpose.FILTER)
    cfg = config.smc2
    state = None
    for k in range(1, len(ys) + 1):
        started = time.perf_counter()
        if state is None:
            state = pf_init(model, theta, cfg.n_x, ys[0], filt.split(1), scheme=cfg.inner_resampling)
        else:
            state = pf_step(state, ys[k - 1], filt.split(k))
        writer.diagnostics(StepDiagnostics(
            t=k,
            log_Lhat_t=state.last_log_increment,
            cum_log_evidence=state.log_zhat,
            n_x=state.n_x,
            inner_ess_mean=state.inner_ess,
            inner_ess_min=state.inner_ess,
            wall_ms=(time.perf_counter() - started) * 1e3,
        ))
        if progress:
            progress(k, len(ys))
    summary.log_evidence = state.log_zhat if state else 0.0
    summary.final_n_x = cfg.n_x


def _run_ibis(model, ys, config, writer, summary, progress, rng):
    state = ibis_init(model, config.smc2, rng, config.threads)
    for k in range(1, len(ys) + 1):
        started = time.perf_counter()
        state = ibis_step(state, ys, rng)
        writer.diagnostics(state.diagnostics[-1].model_copy(update={"wall_ms": (time.perf_counter() - started) * 1e3}))
        if k in config.checkpoints:
            _dump_ibis_checkpoint(writer, state)
            summary.checkpoints[str(k)] = state.cloud.summary(model.param_names)
        if progress:
            progress(k, len(ys))
    summary.log_evidence = state.log_evidence
    summary.n_rejuvenations = sum(1 for d in state.diagnostics if d.resampled)
    summary.posterior = state.cloud.summary(model.param_names)


def _run_smc2(model, ys, config, writer, summary, progress, rng):
    state = smc2_init(model, config.smc2, ys, rng, config.threads)
    state = maybe_rejuvenate(state, ys, rng)
    while True:
        writer.diagnostics(state.diagnostics[-1])
        if state.t in config.checkpoints:
            _dump_smc2_checkpoint(writer, state, rng.split(Purpose.CHECKPOINT))
            summary.checkpoints[str(state.t)] = state.cloud.summary(model.param_names)
        if progress:
            progress(state.t, len(ys))
        if state.t == len(ys):
            break
        state = smc2_step(state, ys, rng)

    summary.log_evidence = state.log_evidence
    summary.final_n_x = state.n_x
    summary.n_rejuvenations = state.n_rejuvenations
    summary.posterior = state.cloud.summary(model.param_names)

    if config.records is not None:
        records = record_probabilities(
            state, config.records.thresholds, config.records.at, rng.split(Purpose.RECORDS), ys
        )
        writer.json("records.json", records.model_dump_json(indent=2))
        log.info("Record probabilities at t=%d: %s", records.t, records.probabilities)


def _run_pmmh(model, ys, config, writer, summary, progress, rng):
    total = config.pmmh.n_iter

    def tick(i, _chain):
        if progress:
            progress(i + 1, total)

    chain = pmmh_run(model, ys, config.pmmh, rng, on_iteration=tick)
    columns = [*model.param_names, "log_zhat", "accepted"]
    table = np.column_stack([
        chain.array(discard_burn_in=False),
        np.array(chain.log_zhats),
        np.array([o.accepted for o in chain.outcomes], dtype=float),
    ])
    np.savetxt(writer.run_dir / "chain.csv", table, delimiter=",", fmt="%.17g", header=",".join(columns), comments="")
    summary.acceptance_rate = chain.acceptance_rate
    summary.final_n_x = config.pmmh.n_x
    summary.posterior = chain.summary()


def run(config: ExperimentConfig, progress: Optional[ProgressHook] = None) -> RunSummary:
    """Run the configured algorithm and write all artifacts to ``config.output_dir``."""
    if config.algorithm == "simulate":
        simulate(config)
        return RunSummary(algorithm="simulate", model=config.model.name, seed=config.seed, T=config.simulate.T,
                          config=config.model_dump(mode="json"))

    started = time.perf_counter()
    model = model_from_config(config)
    ys = load_data(config.data.resolved(), config.data.raw_prices)
    if ys.shape[1] != model.obs_dim:
        raise DataError(config.data.path, f"model {model.name} expects {model.obs_dim} columns, got {ys.shape[1]}")
    if len(ys) == 0:
        raise DataError(config.data.path, "no observations")

    rng = RngStream(config.seed)
    run_dir = Path(config.output_dir)
    writer = RunWriter(run_dir)
    summary = RunSummary(
        algorithm=config.algorithm,
        model=config.model.name,
        seed=config.seed,
        T=len(ys),
        config=config.model_dump(mode="json"),
    )
    log.info("Running %s on %s: T=%d, seed=%d, threads=%d -> %s",
             config.algorithm, model.name, len(ys), config.seed, config.threads, run_dir)

    try:
        if config.algorithm == "kalman":
            _run_kalman(model, ys, config, writer, summary, progress)
        elif config.algorithm == "pf":
            _run_pf(model, ys, config, writer, summary, progress, rng)
        elif config.algorithm == "ibis":
            _run_ibis(model, ys, config, writer, summary, progress, rng)
        elif config.algorithm == "smc2":
            _run_smc2(model, ys, config, writer, summary, progress, rng)
        else:
            _run_pmmh(model, ys, config, writer, summary, progress, rng)
    finally:
        writer.close()

    summary.runtime_s = time.perf_counter() - started
    writer.json("summary.json", summary.model_dump_json(indent=2))
    log.info("Done in %.1fs; log evidence %s", summary.runtime_s, summary.log_evidence)
    return summary


def load_summary(run_dir: str | Path) -> RunSummary:
    path = Path(run_dir) / "summary.json"
    try:
        return RunSummary.model_validate(json.loads(path.read_text()))
    except (OSError, ValueError) as exc:
        raise DataError(path, f"cannot read run summary: {exc}") from exc
