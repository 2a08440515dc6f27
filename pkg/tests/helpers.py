"""Shared builders and exact oracles for the test suite."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from src.models import priors
from src.models.linear_gaussian import LinearGaussian
from src.rng import RngStream

RHO_TRUE = 0.8
SIGMA = 1.0
TAU = 0.5


def lg_rho_model() -> LinearGaussian:
    """LG model with only rho unknown."""
    return LinearGaussian({"sigma": priors.fixed(SIGMA), "tau": priors.fixed(TAU)})


def lg_point_model(rho: float = RHO_TRUE) -> LinearGaussian:
    """LG model with every parameter fixed: θ is empty."""
    return LinearGaussian({"rho": priors.fixed(rho), "sigma": priors.fixed(SIGMA), "tau": priors.fixed(TAU)})


def lg_data(T: int, seed: int = 7, rho: float = RHO_TRUE) -> np.ndarray:
    model = lg_point_model(rho)
    _, ys = model.simulate(np.array([]), T, RngStream(seed))
    return ys


def grid_posterior(model: LinearGaussian, ys: np.ndarray, n_grid: int = 2001):
    """Posterior mean, sd and log evidence of rho under its U(-1, 1) prior, by quadrature."""
    edges = np.linspace(-1.0, 1.0, n_grid + 1)
    grid = 0.5 * (edges[1:] + edges[:-1])
    width = edges[1] - edges[0]
    loglik = np.array([model.exact_loglik(np.array([r]), ys) for r in grid])
    log_joint = loglik + np.log(0.5)
    log_evidence = float(logsumexp(log_joint) + np.log(width))
    W = np.exp(log_joint - logsumexp(log_joint))
    mean = float(W @ grid)
    sd = float(np.sqrt(W @ (grid - mean) ** 2))
    return mean, sd, log_evidence


def mc_z(samples, target) -> np.ndarray:
    """|mean - target| in units of the Monte Carlo standard error, across replicate runs (axis 0)."""
    samples = np.asarray(samples, dtype=float)
    se = samples.std(axis=0, ddof=1) / np.sqrt(len(samples))
    return np.abs(samples.mean(axis=0) - target) / se


def batch_means_se(chain, n_batches: int = 20) -> float:
    """Standard error of a correlated chain average, from the spread of its batch means."""
    chain = np.asarray(chain, dtype=float)
    size = len(chain) // n_batches
    means = chain[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


class ConstantLikelihood(LinearGaussian):
    """Every particle explains every observation equally well."""

    log_c = np.log(0.3)

    def obs_logpdf(self, theta, x, y, t):
        return np.full(x.shape[0], self.log_c)


class NeverObserved(LinearGaussian):
    """Observation density zero everywhere: every filter degenerates."""

    def obs_logpdf(self, theta, x, y, t):
        return np.full(x.shape[0], -np.inf)
