"""Univariate linear-Gaussian model: the reference model with an exact likelihood.

    x_{t+1} = rho * x_t + sigma * eps_t
    y_t     = x_t + tau * eta_t
    x_1    ~ N(0, sigma^2 / (1 - rho^2))
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy import stats

from src.models import priors
from src.models.base import StateSpaceModel
from src.models.priors import PriorSpec
from src.rng import RngLike, as_generator


class LinearGaussian(StateSpaceModel):
    name = "lg"
    param_order = ("rho", "sigma", "tau")
    state_names = ("x",)
    obs_dim = 1
    structural_bounds = {
        "rho": (-1.0, 1.0),
        "sigma": (0.0, np.inf),
        "tau": (0.0, np.inf),
    }
    exact = True

    def default_priors(self):
        return {
            "rho": priors.uniform(-1.0, 1.0),
            "sigma": priors.exponential(1.0),
            "tau": priors.exponential(1.0),
        }

    def init_sample(self, theta, n, rng: RngLike):
        p = self.params(theta)
        sd = p["sigma"] / np.sqrt(1.0 - p["rho"] ** 2)
        return sd * as_generator(rng).standard_normal((n, 1))

    def transition_sample(self, theta, x, t, rng: RngLike):
        p = self.params(theta)
        noise = as_generator(rng).standard_normal(x.shape)
        return p["rho"] * x + p["sigma"] * noise

    def obs_logpdf(self, theta, x, y, t):
        p = self.params(theta)
        y = float(np.asarray(y, dtype=float).reshape(-1)[0])
        return stats.norm.logpdf(y, loc=x[:, 0], scale=p["tau"])

    def obs_sample(self, theta, x, t, rng: RngLike):
        p = self.params(theta)
        return np.array([x[0] + p["tau"] * as_generator(rng).standard_normal()])

    def kalman_system(self, theta):
        p = self.params(theta)
        rho, sigma, tau = p["rho"], p["sigma"], p["tau"]
        F = np.array([[rho]])
        Q = np.array([[sigma**2]])
        H = np.array([[1.0]])
        R = np.array([[tau**2]])
        m1 = np.zeros(1)
        P1 = np.array([[sigma**2 / (1.0 - rho**2)]])
        return F, Q, H, R, m1, P1


def lg_model(overrides: Optional[dict[str, PriorSpec]] = None) -> LinearGaussian:
    """Build the model; ``overrides`` replaces the default priors it names."""
    return LinearGaussian(overrides)
