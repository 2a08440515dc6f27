"""Standalone particle marginal Metropolis-Hastings chain.

Used to cross-check SMC² posteriors. The random-walk covariance may adapt to
the chain history during burn-in; it is frozen afterwards.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from src.errors import FilterDegenerateError
from src.inference.ibis import ThetaCloud
from src.inference.pf import PFState, fresh_filter
from src.inference.proposals import ParameterTransform, ProposalFit, default_rw_scale
from src.inference.smc2 import MoveOutcome, pmmh_move
from src.models.base import StateSpaceModel
from src.models.schema import ParameterSummary, PmmhConfig
from src.rng import Purpose, RngStream

log = logging.getLogger(__name__)

ADAPT_EVERY = 50


@dataclass
class PmmhChain:
    param_names: tuple[str, ...]
    samples: list[np.ndarray] = field(default_factory=list)
    log_zhats: list[float] = field(default_factory=list)
    outcomes: list[MoveOutcome] = field(default_factory=list)
    acceptance_count: int = 0
    burn_in: int = 0
    proposal: Optional[ProposalFit] = None
    adapting: bool = False

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def acceptance_rate(self) -> float:
        return self.acceptance_count / max(len(self.outcomes), 1)

    def array(self, discard_burn_in: bool = True) -> np.ndarray:
        start = self.burn_in if discard_burn_in else 0
        return np.array(self.samples[start:]).reshape(-1, len(self.param_names))

    def summary(self) -> dict[str, ParameterSummary]:
        kept = self.array()
        return ThetaCloud(kept, np.zeros(len(kept))).summary(self.param_names)


def _initial_filter(model, observations, config, rng, theta0) -> PFState:
    for attempt in range(config.init_retries):
        theta = theta0 if theta0 is not None else model.prior_sample(rng.split(Purpose.PRIOR).split(attempt))
        pf = fresh_filter(model, theta, observations, config.n_x, rng.split(Purpose.INIT).split(attempt))
        if not pf.degenerate:
            if attempt:
                log.info("PMMH start found after %d retries", attempt)
            return pf
        log.warning("PMMH start %d: filter degenerate at θ=%s", attempt, np.round(theta, 6).tolist())
    raise FilterDegenerateError(theta, len(observations))


def _adapted(history_z: np.ndarray, dim: int, current: ProposalFit) -> ProposalFit:
    cov = np.atleast_2d(np.cov(history_z, rowvar=False))
    if not np.trace(cov) > 0:
        return current  # chain has not moved yet
    cov = 0.5 * (cov + cov.T) + 1e-9 * max(np.trace(cov) / dim, 1.0) * np.eye(dim)
    return ProposalFit(mean=np.zeros(dim), cov=cov, kind="random_walk", scale=default_rw_scale(dim))


def pmmh_run(
    model: StateSpaceModel,
    observations: np.ndarray,
    config: PmmhConfig,
    rng: RngStream,
    *,
    theta0=None,
    proposal: Optional[ProposalFit] = None,
    on_iteration: Optional[Callable[[int, PmmhChain], None]] = None,
) -> PmmhChain:
    """Run ``config.n_iter`` PMMH iterations on the full data.

    Pass ``proposal`` to use a fixed kernel (no adaptation).
    """
    d = model.theta_dim
    transform = ParameterTransform.from_model(model, config.transform)
    pf = _initial_filter(model, observations, config, rng, theta0)

    adapt = config.adapt and proposal is None and d > 0
    if proposal is None:
        proposal = ProposalFit(mean=np.zeros(d), cov=config.init_scale**2 * np.eye(d), kind="random_walk", scale=1.0)
    chain = PmmhChain(
        param_names=model.param_names,
        burn_in=int(config.burn_in * config.n_iter),
        proposal=proposal,
        adapting=adapt,
    )
    z_history: list[np.ndarray] = []

    for i in range(config.n_iter):
        pf, outcome = pmmh_move(pf, observations, chain.proposal, config.n_x, rng.split(Purpose.CHAIN).split(i), transform)
        chain.samples.append(pf.theta.copy())
        chain.log_zhats.append(pf.log_zhat)
        chain.outcomes.append(outcome)
        chain.acceptance_count += outcome.accepted

        if adapt and i < chain.burn_in:
            z_history.append(transform.to_z(pf.theta))
            if (i + 1) % ADAPT_EVERY == 0 and len(z_history) > 2 * d:
                chain.proposal = _adapted(np.array(z_history), d, chain.proposal)
                log.debug("iteration %d: proposal adapted, acceptance so far %.3f", i + 1, chain.acceptance_rate)
        elif chain.adapting:
            chain.adapting = False
            log.info("PMMH adaptation frozen after %d iterations", i)

        if on_iteration:
            on_iteration(i, chain)

    log.info("PMMH done: %d iterations, acceptance %.3f", config.n_iter, chain.acceptance_rate)
    return chain
