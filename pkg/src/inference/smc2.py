"""SMC²: an outer θ-cloud where every particle drives its own particle filter.

Each step advances all filters by one observation and multiplies the θ-weights
by the filters' likelihood increments. When the ESS falls below γ·N_θ the cloud
is resampled and moved with a particle marginal MH kernel; a low acceptance
rate then triggers the exchange step, which swaps every filter for a fresh one
with more x-particles.

Random streams are keyed by (purpose, t, m), so results do not depend on how
particles are scheduled across threads.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from src.errors import DegenerateWeightsError, FilterDegenerateError, TrajectoryNotStoredError
from src.inference.ibis import ThetaCloud, evidence_increment
from src.inference.pf import PFState, dead_filter, fresh_filter, pf_init, pf_step, trace_trajectories
from src.inference.proposals import ParameterTransform, ProposalFit, accept, fit_proposal
from src.inference.workers import map_particles
from src.models.base import StateSpaceModel
from src.models.schema import Smc2Config, StepDiagnostics
from src.rng import Purpose, RngStream, resample_indices

log = logging.getLogger(__name__)

__all__ = [
    "MoveOutcome",
    "Smc2State",
    "WeightedJointSample",
    "auto_nx_check",
    "evidence_increment",
    "exchange_step",
    "maybe_rejuvenate",
    "pmmh_move",
    "rao_blackwell_estimate",
    "rejuvenate",
    "select_trajectories",
    "smc2_init",
    "smc2_run",
    "smc2_step",
]


@dataclass(frozen=True)
class Smc2State:
    model: StateSpaceModel
    config: Smc2Config
    cloud: ThetaCloud  # attachments are PFStates
    n_x: int
    t: int
    log_evidence: float
    diagnostics: tuple[StepDiagnostics, ...] = field(default_factory=tuple)
    n_rejuvenations: int = 0
    threads: int = 1

    @property
    def filters(self) -> tuple[PFState, ...]:
        return self.cloud.attachments

    @property
    def transform(self) -> ParameterTransform:
        return ParameterTransform.from_model(self.model, self.config.transform)


@dataclass(frozen=True)
class MoveOutcome:
    accepted: bool
    theta_proposed: np.ndarray
    log_zhat_proposed: float
    log_ratio: float
    log_u: float


@dataclass(frozen=True)
class WeightedJointSample:
    """(ω^m, θ^m, x^{n*(m)}) per θ-particle; ``states`` is (N_θ, d) or (N_θ, t, d)."""

    log_weights: np.ndarray
    thetas: np.ndarray
    indices: np.ndarray
    states: np.ndarray
    full: bool = False

    @property
    def norm_weights(self) -> np.ndarray:
        return ThetaCloud(self.thetas, self.log_weights).norm_weights


def _inner_ess(filters) -> tuple[Optional[float], Optional[float]]:
    live = [pf.inner_ess for pf in filters if not pf.degenerate]
    if not live:
        return None, None
    return float(np.mean(live)), float(np.min(live))


def _reweight(log_weights: np.ndarray, inc: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.where(np.isneginf(log_weights), -np.inf, log_weights + inc)


# ---------------------------------------------------------------------------
# Init and step
# ---------------------------------------------------------------------------


def smc2_init(
    model: StateSpaceModel,
    config: Smc2Config,
    observations: np.ndarray,
    rng: RngStream,
    threads: int = 1,
) -> Smc2State:
    """Draw θ from the prior and start one filter per θ on y_1."""
    started = time.perf_counter()
    thetas = model.prior_sample(rng.split(Purpose.PRIOR), size=config.n_theta)
    init_rng = rng.split(Purpose.INIT)

    def start(m):
        try:
            return pf_init(
                model, thetas[m], config.n_x, observations[0], init_rng.split(m),
                store=config.trajectory_store, scheme=config.inner_resampling,
            )
        except FilterDegenerateError:
            return dead_filter(model, thetas[m], config.n_x, 1, config.trajectory_store)

    filters = tuple(map_particles(start, config.n_theta, threads))
    log_w = np.array([pf.log_zhat for pf in filters])
    if not np.any(np.isfinite(log_w)):
        raise DegenerateWeightsError("every filter is degenerate at t=1; check the data and priors")
    n_dead = int(np.sum(~np.isfinite(log_w)))
    if n_dead:
        log.warning("t=1: %d of %d θ-particles start with zero weight", n_dead, config.n_theta)

    log_lhat = evidence_increment(np.zeros(config.n_theta), log_w)
    cloud = ThetaCloud(thetas=thetas, log_weights=log_w, attachments=filters)
    inner_mean, inner_min = _inner_ess(filters)
    record = StepDiagnostics(
        t=1,
        log_Lhat_t=log_lhat,
        cum_log_evidence=log_lhat,
        ess=cloud.ess(),
        resampled=False,
        n_x=config.n_x,
        exchanged=False,
        inner_ess_mean=inner_mean,
        inner_ess_min=inner_min,
        wall_ms=(time.perf_counter() - started) * 1e3,
    )
    return Smc2State(
        model=model, config=config, cloud=cloud, n_x=config.n_x, t=1,
        log_evidence=log_lhat, diagnostics=(record,), threads=threads,
    )


def smc2_step(state: Smc2State, observations: np.ndarray, rng: RngStream) -> Smc2State:
    """Assimilate ``observations[state.t]``, then rejuvenate if the ESS is too low."""
    started = time.perf_counter()
    t = state.t + 1
    y = observations[t - 1]
    prop_rng = rng.split(Purpose.PROPAGATE).split(t)

    def advance(m):
        pf = state.filters[m]
        if pf.degenerate:
            return replace(pf, t=t)
        try:
            return pf_step(pf, y, prop_rng.split(m))
        except FilterDegenerateError:
            return dead_filter(state.model, pf.theta, pf.n_x, t, pf.stores_trajectories)

    filters = tuple(map_particles(advance, state.cloud.size, state.threads))
    inc = np.array([pf.last_log_increment for pf in filters])
    log_lhat = evidence_increment(state.cloud.log_weights, inc)
    log_w = _reweight(state.cloud.log_weights, inc)
    if not np.any(np.isfinite(log_w)):
        raise DegenerateWeightsError(f"every θ-particle has zero weight at t={t}")

    cloud = replace(state.cloud, log_weights=log_w, attachments=filters)
    inner_mean, inner_min = _inner_ess(filters)
    record = StepDiagnostics(
        t=t,
        log_Lhat_t=log_lhat,
        cum_log_evidence=state.log_evidence + log_lhat,
        ess=cloud.ess(),
        resampled=False,
        n_x=state.n_x,
        exchanged=False,
        inner_ess_mean=inner_mean,
        inner_ess_min=inner_min,
    )
    log.debug("t=%d ESS=%.1f log L=%.4f", t, record.ess, log_lhat)
    state = replace(
        state, cloud=cloud, t=t, log_evidence=state.log_evidence + log_lhat,
        diagnostics=state.diagnostics + (record,),
    )
    state = maybe_rejuvenate(state, observations, rng)
    last = state.diagnostics[-1].model_copy(update={"wall_ms": (time.perf_counter() - started) * 1e3})
    return replace(state, diagnostics=state.diagnostics[:-1] + (last,))


def maybe_rejuvenate(state: Smc2State, observations: np.ndarray, rng: RngStream) -> Smc2State:
    """Resample-move (and possibly grow N_x) when ESS < γ·N_θ; updates the last diagnostics record."""
    if state.cloud.ess() >= state.config.ess_threshold * state.cloud.size:
        return state
    state, acceptance = rejuvenate(state, observations, rng)
    n_x_before = state.n_x
    if state.config.auto_nx:
        state = auto_nx_check(state, acceptance, observations, rng)
    last = state.diagnostics[-1].model_copy(update={
        "resampled": True,
        "acceptance_rate": acceptance,
        "n_x": state.n_x,
        "exchanged": state.n_x != n_x_before,
    })
    return replace(state, diagnostics=state.diagnostics[:-1] + (last,))


# ---------------------------------------------------------------------------
# PMMH rejuvenation
# ---------------------------------------------------------------------------


def pmmh_move(
    pf: PFState,
    observations: np.ndarray,
    proposal: ProposalFit,
    n_x: int,
    rng: RngStream,
    transform: Optional[ParameterTransform] = None,
    *,
    store: bool = False,
    scheme: str = "multinomial",
) -> tuple[PFState, MoveOutcome]:
    """One particle marginal MH move on θ using ``observations`` as y_{1:t}.

    The proposed θ̃ gets a fresh filter; the move is accepted with probability
    1 ∧ p(θ̃) Ẑ̃ T(θ̃, θ) / p(θ) Ẑ T(θ, θ̃), computed in the log domain.
    """
    model = pf.model
    transform = transform or ParameterTransform.identity(pf.theta.shape[0])
    z = transform.to_z(pf.theta)
    z_new = proposal.sample(z, rng.split(Purpose.PROPOSE))
    theta_new = transform.from_z(z_new)

    prior_new = model.prior_logpdf(theta_new)
    if np.isfinite(prior_new):
        candidate = fresh_filter(model, theta_new, observations, n_x, rng.split(Purpose.FILTER), store=store, scheme=scheme)
    else:
        candidate = dead_filter(model, theta_new, n_x, len(observations), store)

    new_term = prior_new + candidate.log_zhat + transform.log_jacobian(z_new) if np.isfinite(prior_new) else -np.inf
    cur_term = model.prior_logpdf(pf.theta) + pf.log_zhat + transform.log_jacobian(z)
    if not np.isfinite(new_term):
        log_ratio = -np.inf
    elif not np.isfinite(cur_term):
        log_ratio = np.inf
    else:
        log_ratio = new_term - cur_term + proposal.log_ratio(z, z_new)

    log_u = float(np.log(rng.split(Purpose.ACCEPT).generator().random()))
    accepted = accept(log_ratio, log_u)
    outcome = MoveOutcome(
        accepted=accepted,
        theta_proposed=theta_new,
        log_zhat_proposed=candidate.log_zhat,
        log_ratio=float(log_ratio),
        log_u=log_u,
    )
    return (candidate if accepted else pf), outcome


def rejuvenate(state: Smc2State, observations: np.ndarray, rng: RngStream) -> tuple[Smc2State, float]:
    """Resample (θ, filter) pairs by weight and apply ``moves`` PMMH moves to each.

    The proposal is fitted on the weighted cloud before resampling. Returns
    the new state (all weights reset to 1) and the acceptance rate.
    """
    cfg, t = state.config, state.t
    data = observations[:t]
    transform = state.transform
    proposal = fit_proposal(state.cloud.thetas, state.cloud.log_weights, cfg.proposal, cfg.rw_scale, transform)
    idx = resample_indices(state.cloud.norm_weights, state.cloud.size, "multinomial", rng.split(Purpose.RESAMPLE).split(t))
    move_rng = rng.split(Purpose.MOVE).split(t)

    def move(m):
        pf, accepted = state.filters[idx[m]], 0
        for k in range(cfg.moves):
            pf, outcome = pmmh_move(
                pf, data, proposal, state.n_x, move_rng.split(m).split(k), transform,
                store=cfg.trajectory_store, scheme=cfg.inner_resampling,
            )
            accepted += outcome.accepted
        return pf, accepted

    moved = map_particles(move, state.cloud.size, state.threads)
    filters = tuple(pf for pf, _ in moved)
    acceptance = sum(a for _, a in moved) / (state.cloud.size * cfg.moves)
    cloud = ThetaCloud(
        thetas=np.array([pf.theta for pf in filters]).reshape(state.cloud.thetas.shape),
        log_weights=np.zeros(state.cloud.size),
        attachments=filters,
    )
    log.info("t=%d: resample-move #%d, acceptance %.3f (N_x=%d)", t, state.n_rejuvenations + 1, acceptance, state.n_x)
    return replace(state, cloud=cloud, n_rejuvenations=state.n_rejuvenations + 1), acceptance


# ---------------------------------------------------------------------------
# Growing N_x
# ---------------------------------------------------------------------------


def exchange_step(state: Smc2State, new_nx: int, observations: np.ndarray, rng: RngStream) -> Smc2State:
    """Replace every filter by a fresh one with ``new_nx`` particles.

    ``importance`` mode multiplies each weight by Ẑ̃/Ẑ. ``metropolis`` mode
    accepts each swap with probability 1 ∧ Ẑ̃/Ẑ and leaves the weights alone,
    so rejected particles keep their smaller filter.
    """
    if new_nx < 1:
        raise ValueError(f"new_nx must be >= 1, got {new_nx}")
    cfg, t = state.config, state.t
    data = observations[:t]
    ex_rng = rng.split(Purpose.EXCHANGE).split(t)
    acc_rng = rng.split(Purpose.ACCEPT).split(t)

    def regenerate(m):
        old = state.filters[m]
        return fresh_filter(state.model, old.theta, data, new_nx, ex_rng.split(m),
                            store=cfg.trajectory_store, scheme=cfg.inner_resampling)

    fresh = map_particles(regenerate, state.cloud.size, state.threads)
    old_log_z = np.array([pf.log_zhat for pf in state.filters])
    new_log_z = np.array([pf.log_zhat for pf in fresh])
    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isneginf(new_log_z), -np.inf, new_log_z - old_log_z)

    if cfg.exchange_mode == "importance":
        log_w = _reweight(state.cloud.log_weights, ratio)
        filters = tuple(fresh)
    else:
        log_w = state.cloud.log_weights
        keep_new = [
            accept(ratio[m], float(np.log(acc_rng.split(m).generator().random()))) or state.filters[m].degenerate
            for m in range(state.cloud.size)
        ]
        filters = tuple(f if k else old for f, old, k in zip(fresh, state.filters, keep_new))
        log.info("t=%d: exchange accepted for %d of %d particles", t, sum(keep_new), state.cloud.size)

    if not np.any(np.isfinite(log_w)):
        raise DegenerateWeightsError(f"every θ-particle has zero weight after the exchange at t={t}")
    log.info("t=%d: N_x %d -> %d", t, state.n_x, new_nx)
    return replace(state, cloud=replace(state.cloud, log_weights=log_w, attachments=filters), n_x=new_nx)


def auto_nx_check(state: Smc2State, acceptance_rate: float, observations: np.ndarray, rng: RngStream) -> Smc2State:
    """Grow N_x by the configured factor when the acceptance rate is below threshold."""
    cfg = state.config
    if acceptance_rate >= cfg.acceptance_threshold:
        return state
    if state.n_x >= cfg.n_x_max:
        log.warning(
            "t=%d: acceptance %.3f below %.2f but N_x already at cap %d",
            state.t, acceptance_rate, cfg.acceptance_threshold, cfg.n_x_max,
        )
        return state
    new_nx = min(int(np.ceil(cfg.growth_factor * state.n_x)), cfg.n_x_max)
    return exchange_step(state, new_nx, observations, rng)


# ---------------------------------------------------------------------------
# State inference and evidence
# ---------------------------------------------------------------------------


def select_trajectories(state: Smc2State, rng: RngStream, full: bool = False) -> WeightedJointSample:
    """Draw n*(m) from each filter's weights; ``full`` traces the whole path back."""
    if full and not state.config.trajectory_store:
        raise TrajectoryNotStoredError("full trajectories need smc2.trajectory_store = true")
    sel_rng = rng.split(Purpose.SELECT).split(state.t)
    d = state.model.state_dim
    indices = np.empty(state.cloud.size, dtype=int)
    states = np.full((state.cloud.size, state.t, d) if full else (state.cloud.size, d), np.nan)

    for m, pf in enumerate(state.filters):
        n_star = int(resample_indices(pf.norm_weights, 1, "multinomial", sel_rng.split(m))[0])
        indices[m] = n_star
        if pf.degenerate:
            continue
        states[m] = trace_trajectories(pf, [n_star])[0] if full else pf.particles[n_star]

    return WeightedJointSample(
        log_weights=state.cloud.log_weights.copy(),
        thetas=state.cloud.thetas.copy(),
        indices=indices,
        states=states,
        full=full,
    )


def rao_blackwell_estimate(state: Smc2State, h: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
    """Σ_m ω^m Σ_n W^{n,m} h(θ^m, x^{n,m}) / Σ_m ω^m."""
    W = state.cloud.norm_weights
    total = 0.0
    for w, pf in zip(W, state.filters):
        if w == 0.0:
            continue
        values = np.broadcast_to(np.asarray(h(pf.theta, pf.particles), dtype=float), (pf.n_x,))
        total += w * float(pf.norm_weights @ values)
    return total


def smc2_run(
    model: StateSpaceModel,
    observations: np.ndarray,
    config: Smc2Config,
    rng: RngStream,
    threads: int = 1,
    on_step: Optional[Callable[[Smc2State], None]] = None,
) -> Smc2State:
    """Run over all observations; ``on_step`` sees the state after every t."""
    state = smc2_init(model, config, observations, rng, threads)
    state = maybe_rejuvenate(state, observations, rng)
    if on_step:
        on_step(state)
    for _ in range(1, len(observations)):
        state = smc2_step(state, observations, rng)
        if on_step:
            on_step(state)
    log.info(
        "SMC² done: T=%d, log evidence %.4f, %d rejuvenations, final N_x=%d",
        state.t, state.log_evidence, state.n_rejuvenations, state.n_x,
    )
    return state
