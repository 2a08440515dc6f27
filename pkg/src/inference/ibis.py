"""Iterated batch importance sampling for models with an exact likelihood.

Each θ-particle carries its Kalman state, so the incremental weight
p(y_t | y_{1:t-1}, θ) is exact. When the ESS drops below γ·N_θ the cloud is
resampled and moved with an MH kernel targeting p(θ | y_{1:t}).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np
from scipy.special import logsumexp

from src.errors import DegenerateWeightsError, KalmanError
from src.inference.pf import ess
from src.inference.proposals import ParameterTransform, fit_proposal, mh_move
from src.inference.workers import map_particles
from src.kalman import KalmanState, kalman_predict, kalman_update
from src.models.base import StateSpaceModel
from src.models.schema import ParameterSummary, Smc2Config, StepDiagnostics
from src.rng import Purpose, RngStream, resample_indices

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ThetaCloud:
    thetas: np.ndarray  # (N_θ, d)
    log_weights: np.ndarray
    attachments: tuple[Any, ...] = ()

    @property
    def size(self) -> int:
        return self.thetas.shape[0]

    @property
    def norm_weights(self) -> np.ndarray:
        return np.exp(self.log_weights - logsumexp(self.log_weights))

    def ess(self) -> float:
        return ess(self.log_weights)

    def summary(self, names) -> dict[str, ParameterSummary]:
        """Weighted mean, variance and 5% / 95% quantiles per parameter."""
        W = self.norm_weights
        out = {}
        for i, name in enumerate(names):
            col = self.thetas[:, i]
            mean = float(W @ col)
            order = np.argsort(col)
            cdf = np.cumsum(W[order])
            q05, q95 = (float(col[order][min(np.searchsorted(cdf, q), len(col) - 1)]) for q in (0.05, 0.95))
            out[name] = ParameterSummary(mean=mean, var=float(W @ (col - mean) ** 2), q05=q05, q95=q95)
        return out


def evidence_increment(log_weights, log_increments) -> float:
    """log of Σ ω u / Σ ω, the weighted average of the incremental likelihoods."""
    lw = np.asarray(log_weights, dtype=float)
    inc = np.asarray(log_increments, dtype=float)
    if not np.any(np.isfinite(lw)):
        raise DegenerateWeightsError("every θ-particle has zero weight")
    with np.errstate(invalid="ignore"):
        joint = np.where(np.isneginf(lw), -np.inf, lw + inc)
    return float(logsumexp(joint) - logsumexp(lw))


def resample_move(
    cloud: ThetaCloud,
    log_target,
    config: Smc2Config,
    transform: ParameterTransform,
    rng: RngStream,
    t: int,
    threads: int = 1,
) -> tuple[np.ndarray, float]:
    """Resample θ by weight and move each copy with the fitted MH kernel.

    Returns (new θ array, acceptance rate). The proposal is fitted on the
    weighted cloud before resampling.
    """
    proposal = fit_proposal(cloud.thetas, cloud.log_weights, config.proposal, config.rw_scale, transform)
    idx = resample_indices(cloud.norm_weights, cloud.size, "multinomial", rng.split(Purpose.RESAMPLE).split(t))
    move_rng = rng.split(Purpose.MOVE).split(t)

    def move(m):
        return mh_move(cloud.thetas[idx[m]], log_target, proposal, config.moves, move_rng.split(m), transform)

    moved = map_particles(move, cloud.size, threads)
    thetas = np.array([th for th, _ in moved]).reshape(cloud.thetas.shape)
    accepted = sum(n for _, n in moved)
    return thetas, accepted / (cloud.size * config.moves)


# ---------------------------------------------------------------------------
# IBIS
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IbisState:
    model: StateSpaceModel
    cloud: ThetaCloud
    config: Smc2Config
    t: int = 0
    log_evidence: float = 0.0
    diagnostics: tuple[StepDiagnostics, ...] = field(default_factory=tuple)
    threads: int = 1


def _prior_kalman(model, theta) -> KalmanState:
    _, _, _, _, m1, P1 = model.kalman_system(theta)
    return KalmanState(mean=m1, cov=P1)


def _advance_kalman(model, theta, state: KalmanState, y) -> Optional[KalmanState]:
    F, Q, H, R, _, _ = model.kalman_system(theta)
    try:
        return kalman_update(state if state.t == 0 else kalman_predict(state, F, Q), y, H, R)
    except KalmanError as exc:
        log.warning("Dropping θ=%s: %s", np.round(theta, 6).tolist(), exc)
        return None


def ibis_init(model: StateSpaceModel, config: Smc2Config, rng: RngStream, threads: int = 1) -> IbisState:
    if not model.exact:
        raise ValueError(f"IBIS needs an exact likelihood; model {model.name!r} has none")
    thetas = model.prior_sample(rng.split(Purpose.PRIOR), size=config.n_theta)
    attachments = tuple(_prior_kalman(model, th) for th in thetas)
    cloud = ThetaCloud(thetas=thetas, log_weights=np.zeros(config.n_theta), attachments=attachments)
    return IbisState(model=model, cloud=cloud, config=config, threads=threads)


def ibis_step(state: IbisState, observations: np.ndarray, rng: RngStream) -> IbisState:
    """Assimilate ``observations[state.t]``; resample-move if the ESS is low."""
    model, cloud = state.model, state.cloud
    t = state.t + 1
    y = observations[t - 1]

    advanced = map_particles(
        lambda m: _advance_kalman(model, cloud.thetas[m], cloud.attachments[m], y), cloud.size, state.threads
    )
    inc = np.array([
        -np.inf if new is None else new.loglik - old.loglik for new, old in zip(advanced, cloud.attachments)
    ])
    attachments = tuple(
        new if new is not None else replace(old, t=t) for new, old in zip(advanced, cloud.attachments)
    )

    log_lhat = evidence_increment(cloud.log_weights, inc)
    with np.errstate(invalid="ignore"):
        lw = np.where(np.isneginf(cloud.log_weights), -np.inf, cloud.log_weights + inc)
    if not np.any(np.isfinite(lw)):
        raise DegenerateWeightsError(f"every θ-particle has zero weight at t={t}")
    cloud = ThetaCloud(thetas=cloud.thetas, log_weights=lw, attachments=attachments)
    current_ess = cloud.ess()
    log_evidence = state.log_evidence + log_lhat

    resampled = current_ess < state.config.ess_threshold * cloud.size
    acceptance = None
    if resampled:
        data = observations[:t]

        def log_target(theta):
            prior = model.prior_logpdf(theta)
            return prior + model.exact_loglik(theta, data) if np.isfinite(prior) else -np.inf

        transform = ParameterTransform.from_model(model, state.config.transform)
        thetas, acceptance = resample_move(cloud, log_target, state.config, transform, rng, t, state.threads)
        filters = map_particles(lambda m: model.exact_filter(thetas[m], data)[-1], len(thetas), state.threads)
        cloud = ThetaCloud(thetas=thetas, log_weights=np.zeros(len(thetas)), attachments=tuple(filters))
        log.info("t=%d: resample-move (ESS %.1f), acceptance %.3f", t, current_ess, acceptance)

    record = StepDiagnostics(
        t=t,
        log_Lhat_t=log_lhat,
        cum_log_evidence=log_evidence,
        ess=current_ess,
        resampled=resampled,
        acceptance_rate=acceptance,
    )
    log.debug("t=%d ESS=%.1f log L=%.4f", t, current_ess, log_lhat)
    return replace(state, cloud=cloud, t=t, log_evidence=log_evidence, diagnostics=state.diagnostics + (record,))


def ibis_run(
    model: StateSpaceModel, observations: np.ndarray, config: Smc2Config, rng: RngStream, threads: int = 1
) -> IbisState:
    state = ibis_init(model, config, rng, threads)
    for _ in range(len(observations)):
        state = ibis_step(state, observations, rng)
    return state
