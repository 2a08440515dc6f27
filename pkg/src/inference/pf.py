"""Bootstrap particle filter with a running estimate of log p(y_{1:t} | θ).

Particles are proposed from the model transition and weighted by the
observation density; ancestors are redrawn at every step. Weights live in the
log domain throughout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from src.errors import DegenerateWeightsError, FilterDegenerateError, TrajectoryNotStoredError
from src.models.base import StateSpaceModel, is_missing
from src.rng import RngLike, RngStream, Scheme, as_generator, resample_indices

log = logging.getLogger(__name__)

# One entry per time: (particles x_s, ancestors of x_s in x_{s-1}); None at s = 1
History = tuple[tuple[np.ndarray, Optional[np.ndarray]], ...]


@dataclass(frozen=True)
class PFState:
    model: StateSpaceModel
    theta: np.ndarray
    particles: np.ndarray
    log_weights: np.ndarray
    norm_weights: np.ndarray
    log_zhat: float
    last_log_increment: float
    t: int
    history: Optional[History] = None
    scheme: Scheme = "multinomial"

    @property
    def n_x(self) -> int:
        return self.particles.shape[0]

    @property
    def degenerate(self) -> bool:
        return self.log_zhat == -np.inf

    @property
    def stores_trajectories(self) -> bool:
        return self.history is not None

    @property
    def inner_ess(self) -> float:
        return float(1.0 / np.sum(self.norm_weights**2))


def dead_filter(model: StateSpaceModel, theta, n_x: int, t: int, store: bool = False) -> PFState:
    """Placeholder for a filter whose estimate collapsed to zero (log Ẑ = -inf)."""
    return PFState(
        model=model,
        theta=np.asarray(theta, dtype=float),
        particles=np.zeros((n_x, model.state_dim)),
        log_weights=np.zeros(n_x),
        norm_weights=np.full(n_x, 1.0 / n_x),
        log_zhat=-np.inf,
        last_log_increment=-np.inf,
        t=t,
        history=() if store else None,
    )


def _weigh(model, theta, x, y, t):
    """Return (log weights, normalised weights, log increment)."""
    n = x.shape[0]
    if is_missing(y):
        return np.zeros(n), np.full(n, 1.0 / n), 0.0
    lw = np.asarray(model.obs_logpdf(theta, x, y, t), dtype=float)
    lw = np.where(np.isnan(lw), -np.inf, lw)
    if not np.any(np.isfinite(lw)):
        raise FilterDegenerateError(theta, t)
    total = logsumexp(lw)
    return lw, np.exp(lw - total), float(total - np.log(n))


def pf_init(
    model: StateSpaceModel,
    theta,
    n_x: int,
    y,
    rng: RngLike,
    *,
    store: bool = False,
    scheme: Scheme = "multinomial",
) -> PFState:
    """Draw x_1 from the initial law and weight it against y_1."""
    if n_x < 1:
        raise ValueError(f"n_x must be >= 1, got {n_x}")
    theta = np.asarray(theta, dtype=float)
    x = model.init_sample(theta, n_x, as_generator(rng))
    lw, W, inc = _weigh(model, theta, x, y, 1)
    return PFState(
        model=model,
        theta=theta,
        particles=x,
        log_weights=lw,
        norm_weights=W,
        log_zhat=inc,
        last_log_increment=inc,
        t=1,
        history=((x, None),) if store else None,
        scheme=scheme,
    )


def pf_step(state: PFState, y, rng: RngLike) -> PFState:
    """Resample, propagate through the transition and reweight against y_{t+1}."""
    gen = as_generator(rng)
    t = state.t + 1
    ancestors = resample_indices(state.norm_weights, state.n_x, state.scheme, gen)
    x = state.model.transition_sample(state.theta, state.particles[ancestors], state.t, gen)
    lw, W, inc = _weigh(state.model, state.theta, x, y, t)
    history = state.history + ((x, ancestors),) if state.history is not None else None
    return replace(
        state,
        particles=x,
        log_weights=lw,
        norm_weights=W,
        log_zhat=state.log_zhat + inc,
        last_log_increment=inc,
        t=t,
        history=history,
    )


def pf_full_loglik(
    model: StateSpaceModel,
    theta,
    ys: np.ndarray,
    n_x: int,
    rng: RngStream,
    *,
    store: bool = False,
    scheme: Scheme = "multinomial",
) -> tuple[float, PFState]:
    """Filter y_{1:t} from scratch; step s draws from ``rng.split(s)``."""
    if len(ys) < 1:
        raise ValueError("pf_full_loglik needs at least one observation")
    state = pf_init(model, theta, n_x, ys[0], rng.split(1), store=store, scheme=scheme)
    for s in range(2, len(ys) + 1):
        state = pf_step(state, ys[s - 1], rng.split(s))
    return state.log_zhat, state


def fresh_filter(model, theta, ys, n_x, rng: RngStream, *, store=False, scheme="multinomial") -> PFState:
    """``pf_full_loglik`` with degeneracy turned into a dead filter."""
    try:
        return pf_full_loglik(model, theta, ys, n_x, rng, store=store, scheme=scheme)[1]
    except FilterDegenerateError as exc:
        log.debug("Fresh filter degenerate: %s", exc)
        return dead_filter(model, theta, n_x, len(ys), store=store)


def ess(log_weights) -> float:
    """(Σω)² / Σω², evaluated from log ω."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0 or not np.any(np.isfinite(lw)):
        raise DegenerateWeightsError("no finite weight, ESS undefined")
    return float(np.exp(2.0 * logsumexp(lw) - logsumexp(2.0 * lw)))


# ---------------------------------------------------------------------------
# Genealogy
# ---------------------------------------------------------------------------


def index_history(state: PFState, idx) -> np.ndarray:
    """Indices (len(idx), t) of the ancestors of x_t[idx] at times 1..t (0-based)."""
    if state.history is None:
        raise TrajectoryNotStoredError("filter was run without trajectory storage")
    h = np.atleast_1d(np.asarray(idx, dtype=int))
    out = np.empty((h.size, state.t), dtype=int)
    for s in range(state.t, 0, -1):
        out[:, s - 1] = h
        ancestors = state.history[s - 1][1]
        if ancestors is not None:
            h = ancestors[h]
    return out


def trace_trajectories(state: PFState, idx) -> np.ndarray:
    """Full paths (len(idx), t, state_dim) ending at x_t[idx]."""
    hist = index_history(state, idx)
    paths = np.empty(hist.shape + (state.model.state_dim,))
    for s in range(state.t):
        paths[:, s] = state.history[s][0][hist[:, s]]
    return paths
