"""Annual best two times modelled with a GEV law for minima around a smooth trend.

The location mu_t follows a second-order random walk (level and slope); each
year contributes the two fastest times y1 < y2, or nothing at all.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy import stats

from src.errors import InvalidObservationError, InvalidParameterError
from src.models import priors
from src.models.base import StateSpaceModel, is_missing
from src.models.priors import PriorSpec
from src.rng import RngLike, as_generator

TREND_F = np.array([[1.0, 1.0], [0.0, 1.0]])
TREND_Q_UNIT = np.array([[1.0 / 3.0, 0.5], [0.5, 1.0]])
TREND_Q_CHOL = np.linalg.cholesky(TREND_Q_UNIT)


# ---------------------------------------------------------------------------
# GEV for minima: G(y) = 1 - exp(-[1 - xi (y - mu) / sigma]_+^(-1/xi))
# If Y follows it, -Y is scipy's genextreme with c = -xi, loc = -mu.
# ---------------------------------------------------------------------------


def _check_gev(xi: float, sigma: float):
    if not sigma > 0:
        raise InvalidParameterError(f"GEV scale must be > 0, got {sigma}")
    if xi == 0:
        raise InvalidParameterError("GEV shape must be non-zero")


def _mirrored(mu, xi, sigma):
    _check_gev(xi, sigma)
    return stats.genextreme(-xi, loc=-np.asarray(mu, dtype=float), scale=sigma)


def gev_cdf(y, mu, xi: float, sigma: float):
    return _mirrored(mu, xi, sigma).sf(-np.asarray(y, dtype=float))


def gev_logpdf(y, mu, xi: float, sigma: float):
    return _mirrored(mu, xi, sigma).logpdf(-np.asarray(y, dtype=float))


def gev_log_survival(y, mu, xi: float, sigma: float):
    """log(1 - G(y))."""
    return _mirrored(mu, xi, sigma).logcdf(-np.asarray(y, dtype=float))


def athletics_obs_logpdf(params: dict, x: np.ndarray, y) -> np.ndarray:
    """log g(y1) + log g(y2) - log(1 - G(y1)); zero for a missing year."""
    n = x.shape[0]
    if is_missing(y):
        return np.zeros(n)
    y1, y2 = (float(v) for v in np.asarray(y, dtype=float).reshape(-1)[:2])
    if not y1 < y2:
        raise InvalidObservationError(f"best times must satisfy y1 < y2, got ({y1}, {y2})")

    mu, xi, sigma = x[:, 0], params["xi"], params["sigma"]
    with np.errstate(invalid="ignore"):
        out = gev_logpdf(y1, mu, xi, sigma) + gev_logpdf(y2, mu, xi, sigma) - gev_log_survival(y1, mu, xi, sigma)
    return np.where(np.isnan(out), -np.inf, out)


def athletics_transition(params: dict, x: np.ndarray, rng: RngLike) -> np.ndarray:
    noise = as_generator(rng).standard_normal(x.shape) @ TREND_Q_CHOL.T
    return x @ TREND_F.T + params["nu"] * noise


class Athletics(StateSpaceModel):
    """State (mu, mudot). x0 is drawn from the diffuse initial law, x1 is one step on."""

    name = "athletics"
    param_order = ("nu", "xi", "sigma")
    state_names = ("mu", "mudot")
    obs_dim = 2
    structural_bounds = {
        "nu": (0.0, np.inf),
        "xi": (-np.inf, 0.0),
        "sigma": (0.0, np.inf),
    }

    def __init__(self, priors_=None, init_mean: float = 520.0, init_sd: float = 10.0, slope_sd: float = 1.0):
        self.init_mean = init_mean
        self.init_sd = init_sd
        self.slope_sd = slope_sd
        super().__init__(priors_)

    def default_priors(self):
        return {
            "nu": priors.exponential(0.2),
            "xi": priors.exponential(0.5, reflect=True),
            "sigma": priors.exponential(0.2),
        }

    def init_sample(self, theta, n, rng):
        gen = as_generator(rng)
        x0 = np.column_stack([
            self.init_mean + self.init_sd * gen.standard_normal(n),
            self.slope_sd * gen.standard_normal(n),
        ])
        return athletics_transition(self.params(theta), x0, gen)

    def transition_sample(self, theta, x, t, rng):
        return athletics_transition(self.params(theta), x, rng)

    def obs_logpdf(self, theta, x, y, t):
        return athletics_obs_logpdf(self.params(theta), x, y)

    def obs_sample(self, theta, x, t, rng):
        """Two ordered draws: y1 from G, y2 from G truncated to (y1, inf)."""
        p = self.params(theta)
        gen = as_generator(rng)
        law = _mirrored(x[0], p["xi"], p["sigma"])
        y1 = -law.isf(gen.random())
        v = 1.0 - gen.random()
        y2 = -law.ppf(law.cdf(-y1) * v)
        return np.array([y1, y2])

    def record_probability(self, theta, mu, threshold: float):
        """P(y_t <= threshold | mu_t, θ) for the best time of the year."""
        p = self.params(theta)
        return gev_cdf(threshold, mu, p["xi"], p["sigma"])


def athletics_model(
    overrides: Optional[dict[str, PriorSpec]] = None,
    init_mean: float = 520.0,
    init_sd: float = 10.0,
    slope_sd: float = 1.0,
) -> Athletics:
    return Athletics(overrides, init_mean=init_mean, init_sd=init_sd, slope_sd=slope_sd)
