"""The state-space model contract shared by every sampler.

A model bundles a prior over θ, a sampler for the initial state, a sampler for
the transition (its density is never needed), and the observation log-density.
Samplers and ``obs_logpdf`` are vectorized over an (N, state_dim) particle array.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from src.errors import InvalidParameterError
from src.models.priors import PriorSpec
from src.rng import RngLike, as_generator

MAX_PRIOR_REDRAWS = 1000


def is_missing(y) -> bool:
    """A time index with no observation is encoded as a NaN row."""
    return bool(np.any(np.isnan(np.asarray(y, dtype=float))))


class StateSpaceModel:
    """Base class for the built-in models.

    Subclasses set ``name``, ``param_order``, ``state_names``, ``obs_dim`` and
    ``structural_bounds``, provide ``default_priors`` and implement the
    samplers. ``exact`` models also provide ``kalman_system``.
    """

    name: str = "base"
    param_order: tuple[str, ...] = ()
    state_names: tuple[str, ...] = ()
    obs_dim: int = 1
    structural_bounds: dict[str, tuple[float, float]] = {}
    exact: bool = False

    def __init__(self, priors: Optional[dict[str, PriorSpec]] = None):
        merged = {**self.default_priors(), **(priors or {})}
        unknown = set(merged) - set(self.param_order)
        if unknown:
            raise InvalidParameterError(f"{self.name}: unknown parameters {sorted(unknown)}")
        self.priors = merged
        self.param_names = tuple(n for n in self.param_order if not merged[n].is_fixed)
        self.fixed_values = {n: float(merged[n].value) for n in self.param_order if merged[n].is_fixed}

    def default_priors(self) -> dict[str, PriorSpec]:
        raise NotImplementedError(f"{self.name}: default_priors not implemented")

    @property
    def theta_dim(self) -> int:
        return len(self.param_names)

    @property
    def state_dim(self) -> int:
        return len(self.state_names)

    # ------------------------------------------------------------------
    # Parameters
    # ------------------------------------------------------------------

    def params(self, theta) -> dict[str, float]:
        """Named view of θ, fixed parameters included."""
        values = np.atleast_1d(np.asarray(theta, dtype=float))
        if values.shape != (self.theta_dim,):
            raise InvalidParameterError(
                f"{self.name}: theta must have {self.theta_dim} entries, got shape {values.shape}"
            )
        named = dict(self.fixed_values)
        named.update(zip(self.param_names, values.tolist()))
        return named

    def pack(self, **values: float) -> np.ndarray:
        """Build θ from named values of the free parameters."""
        missing = [n for n in self.param_names if n not in values]
        if missing:
            raise InvalidParameterError(f"{self.name}: missing values for {missing}")
        return np.array([float(values[n]) for n in self.param_names])

    def param_bounds(self) -> list[tuple[float, float]]:
        """Open support of each free parameter: prior support ∩ structural bounds."""
        bounds = []
        for n in self.param_names:
            lo, hi = self.priors[n].support()
            s_lo, s_hi = self.structural_bounds.get(n, (-np.inf, np.inf))
            bounds.append((max(lo, s_lo), min(hi, s_hi)))
        return bounds

    def in_support(self, theta) -> bool:
        values = np.atleast_1d(np.asarray(theta, dtype=float))
        if values.shape != (self.theta_dim,) or not np.all(np.isfinite(values)):
            return False
        return all(lo < v < hi for v, (lo, hi) in zip(values, self.param_bounds()))

    def prior_logpdf(self, theta) -> float:
        if not self.in_support(theta):
            return -np.inf
        values = np.atleast_1d(np.asarray(theta, dtype=float))
        return float(sum(self.priors[n].logpdf(v) for n, v in zip(self.param_names, values)))

    def prior_sample(self, rng: RngLike, size: Optional[int] = None) -> np.ndarray:
        """Draw θ from the prior, restricted to the structural support."""
        gen = as_generator(rng)
        n = 1 if size is None else size
        out = np.empty((n, self.theta_dim))
        for i in range(n):
            for _ in range(MAX_PRIOR_REDRAWS):
                draw = np.array([float(self.priors[p].rvs(gen)) for p in self.param_names])
                if self.in_support(draw):
                    break
            else:
                raise InvalidParameterError(f"{self.name}: prior puts no mass on the model support")
            out[i] = draw
        return out[0] if size is None else out

    # ------------------------------------------------------------------
    # Dynamics
    # ------------------------------------------------------------------

    def init_sample(self, theta, n: int, rng: RngLike) -> np.ndarray:
        raise NotImplementedError

    def transition_sample(self, theta, x: np.ndarray, t: int, rng: RngLike) -> np.ndarray:
        raise NotImplementedError

    def obs_logpdf(self, theta, x: np.ndarray, y, t: int) -> np.ndarray:
        raise NotImplementedError

    def obs_sample(self, theta, x: np.ndarray, t: int, rng: RngLike) -> np.ndarray:
        raise NotImplementedError

    def simulate(self, theta, T: int, rng: RngLike) -> tuple[np.ndarray, np.ndarray]:
        """Forward-simulate (states (T, d), observations (T, obs_dim))."""
        gen = as_generator(rng)
        xs = np.empty((T, self.state_dim))
        ys = np.empty((T, self.obs_dim))
        x = None
        for t in range(1, T + 1):
            x = self.init_sample(theta, 1, gen) if t == 1 else self.transition_sample(theta, x, t - 1, gen)
            xs[t - 1] = x[0]
            ys[t - 1] = self.obs_sample(theta, x[0], t, gen)
        return xs, ys

    # ------------------------------------------------------------------
    # Exact likelihood (Kalman-tractable models only)
    # ------------------------------------------------------------------

    def kalman_system(self, theta):
        """(F, Q, H, R, m1, P1) for linear-Gaussian models."""
        raise NotImplementedError(f"{self.name} has no exact likelihood")

    def exact_filter(self, theta, ys):
        from src.kalman import kalman_filter

        F, Q, H, R, m1, P1 = self.kalman_system(theta)
        return kalman_filter(m1, P1, ys, F, Q, H, R)

    def exact_loglik(self, theta, ys) -> float:
        if len(ys) == 0:
            return 0.0
        return self.exact_filter(theta, ys)[-1].loglik
