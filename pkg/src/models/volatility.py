"""Lévy-driven stochastic volatility models.

Spot volatility is a shot-noise process: jumps arrive as a Poisson process with
exponential sizes and decay at rate λ. The daily integral of the spot process
(actual volatility v) drives the variance of the log-return. States carry the
per-day jump sum u so leverage terms stay a function of the state.

One-factor state: (v, z, u). Two-factor state: (v1, z1, u1, v2, z2, u2).
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy import stats

from src.models import priors
from src.models.base import StateSpaceModel
from src.models.priors import PriorSpec
from src.rng import RngLike, as_generator, sample_standard

POSITIVE = (0.0, np.inf)


def sv_factor_transition(z, intensity: float, jump_rate: float, lam: float, rng: RngLike):
    """Advance one shot-noise factor by a unit of time.

    For each particle: k ~ Poisson(intensity) jumps at uniform times c in the
    period, sizes e ~ Exp(jump_rate). Returns (v', z', u') arrays of shape (n,).
    """
    gen = as_generator(rng)
    z = np.asarray(z, dtype=float)
    n = z.shape[0]

    counts = sample_standard("poisson", gen, mean=intensity, size=n)
    total = int(counts.sum())
    times = sample_standard("uniform01", gen, size=total)
    sizes = sample_standard("exponential", gen, rate=jump_rate, size=total)
    owner = np.repeat(np.arange(n), counts)

    decay = np.exp(-lam)
    z_next = decay * z + np.bincount(owner, weights=np.exp(-lam * (1.0 - times)) * sizes, minlength=n)

    # (z - z' + sum e) / lam, written with non-negative terms only
    kept = np.bincount(owner, weights=-np.expm1(-lam * (1.0 - times)) * sizes, minlength=n)
    v_next = (-np.expm1(-lam) * z + kept) / lam
    u_next = np.bincount(owner, weights=sizes, minlength=n)
    return v_next, z_next, u_next


def stationary_z(shape: float, rate: float, n: int, rng: RngLike) -> np.ndarray:
    """Draw z from its Gamma(shape, rate) stationary law; a switched-off factor stays at 0."""
    if shape == 0.0:
        return np.zeros(n)
    return sample_standard("gamma", rng, shape=shape, rate=rate, size=n)


def sv1_transition(params: dict, x: np.ndarray, rng: RngLike) -> np.ndarray:
    xi, omega2, lam = params["xi"], params["omega2"], params["lam"]
    v, z, u = sv_factor_transition(x[:, 1], lam * xi**2 / omega2, xi / omega2, lam, rng)
    return np.column_stack([v, z, u])


def _gaussian_logpdf(y: float, mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    out = np.full(var.shape, -np.inf)
    ok = var > 0
    out[ok] = stats.norm.logpdf(y, loc=mean[ok], scale=np.sqrt(var[ok]))
    return out


def sv1_obs_logpdf(params: dict, x: np.ndarray, y) -> np.ndarray:
    """log N(y; mu + beta v, v); -inf where v <= 0."""
    y = float(np.asarray(y, dtype=float).reshape(-1)[0])
    v = x[:, 0]
    return _gaussian_logpdf(y, params["mu"] + params["beta"] * v, v)


class OneFactorSV(StateSpaceModel):
    name = "sv1"
    param_order = ("mu", "beta", "xi", "omega2", "lam")
    state_names = ("v", "z", "u")
    obs_dim = 1
    structural_bounds = {"xi": POSITIVE, "omega2": POSITIVE, "lam": POSITIVE}

    def default_priors(self):
        return {
            "mu": priors.normal(0.0, 10.0),
            "beta": priors.normal(0.0, 10.0),
            "xi": priors.exponential(0.2),
            "omega2": priors.exponential(0.2),
            "lam": priors.exponential(1.0),
        }

    def init_sample(self, theta, n, rng):
        p = self.params(theta)
        gen = as_generator(rng)
        z0 = stationary_z(p["xi"] ** 2 / p["omega2"], p["xi"] / p["omega2"], n, gen)
        return sv1_transition(p, np.column_stack([np.zeros(n), z0, np.zeros(n)]), gen)

    def transition_sample(self, theta, x, t, rng):
        return sv1_transition(self.params(theta), x, rng)

    def obs_logpdf(self, theta, x, y, t):
        return sv1_obs_logpdf(self.params(theta), x, y)

    def obs_sample(self, theta, x, t, rng):
        p = self.params(theta)
        v = x[0]
        eps = as_generator(rng).standard_normal()
        return np.array([p["mu"] + p["beta"] * v + np.sqrt(v) * eps])


class MultiFactorSV(StateSpaceModel):
    """Two independent shot-noise factors with weights w and 1 - w.

    Factor i uses (w_i ξ, w_i ω², λ_i), so jumps arrive at rate λ_i w_i ξ²/ω²
    with mean size ω²/ξ. λ2 = λ1 + dlambda keeps the factors ordered. With
    leverage the return also loads on each factor's jump sum, centred by its
    expectation.
    """

    param_order_base = ("mu", "beta", "xi", "omega2", "lambda1", "dlambda", "w")
    state_names = ("v1", "z1", "u1", "v2", "z2", "u2")
    obs_dim = 1
    structural_bounds = {
        "xi": POSITIVE,
        "omega2": POSITIVE,
        "lambda1": POSITIVE,
        "dlambda": POSITIVE,
        "w": (0.0, 1.0),
    }

    def __init__(self, priors_=None, leverage: bool = False):
        self.leverage = leverage
        self.name = "sv2-leverage" if leverage else "sv2"
        self.param_order = self.param_order_base + (("rho1", "rho2") if leverage else ())
        super().__init__(priors_)

    def default_priors(self):
        chosen = {
            "mu": priors.normal(0.0, 10.0),
            "beta": priors.normal(0.0, 10.0),
            "xi": priors.exponential(0.2),
            "omega2": priors.exponential(0.2),
            "lambda1": priors.exponential(1.0),
            "dlambda": priors.exponential(0.5),
            "w": priors.uniform(0.0, 1.0),
        }
        if self.leverage:
            chosen["rho1"] = priors.normal(0.0, 10.0)
            chosen["rho2"] = priors.normal(0.0, 10.0)
        return chosen

    def params(self, theta):
        p = super().params(theta)
        p.setdefault("rho1", 0.0)
        p.setdefault("rho2", 0.0)
        p["lambda2"] = p["lambda1"] + p["dlambda"]
        return p

    def _factors(self, p):
        xi2_over = p["xi"] ** 2 / p["omega2"]
        jump_rate = p["xi"] / p["omega2"]
        return [
            (p["lambda1"], p["w"] * xi2_over, jump_rate),
            (p["lambda2"], (1.0 - p["w"]) * xi2_over, jump_rate),
        ]

    def _advance(self, p, z_cols, gen):
        cols = []
        for (lam, shape, jump_rate), z in zip(self._factors(p), z_cols):
            cols.extend(sv_factor_transition(z, lam * shape, jump_rate, lam, gen))
        return np.column_stack(cols)

    def init_sample(self, theta, n, rng):
        p = self.params(theta)
        gen = as_generator(rng)
        z0 = [stationary_z(shape, rate, n, gen) for _, shape, rate in self._factors(p)]
        return self._advance(p, z0, gen)

    def transition_sample(self, theta, x, t, rng):
        return self._advance(self.params(theta), (x[:, 1], x[:, 4]), as_generator(rng))

    def _obs_mean(self, p, x):
        v = x[:, 0] + x[:, 3]
        compensator = p["xi"] * (p["w"] * p["rho1"] * p["lambda1"] + (1.0 - p["w"]) * p["rho2"] * p["lambda2"])
        return p["mu"] + p["beta"] * v + p["rho1"] * x[:, 2] + p["rho2"] * x[:, 5] - compensator, v

    def obs_logpdf(self, theta, x, y, t):
        y = float(np.asarray(y, dtype=float).reshape(-1)[0])
        mean, v = self._obs_mean(self.params(theta), x)
        return _gaussian_logpdf(y, mean, v)

    def obs_sample(self, theta, x, t, rng):
        mean, v = self._obs_mean(self.params(theta), x[None, :])
        eps = as_generator(rng).standard_normal()
        return np.array([mean[0] + np.sqrt(v[0]) * eps])


def sv1_model(overrides: Optional[dict[str, PriorSpec]] = None) -> OneFactorSV:
    return OneFactorSV(overrides)


def svm_model(overrides: Optional[dict[str, PriorSpec]] = None, leverage: bool = False) -> MultiFactorSV:
    return MultiFactorSV(overrides, leverage=leverage)
