"""Gaussian proposals learned from a weighted θ-cloud, and the MH kernel using them.

Proposals live in an unconstrained coordinate system: each parameter is mapped
through log / logit according to its support, and targets pick up the log
Jacobian of the inverse map.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np
from scipy import stats
from scipy.special import expit, logsumexp

from src.errors import DegenerateWeightsError, InvalidParameterError
from src.rng import RngLike, as_generator

log = logging.getLogger(__name__)

ProposalKind = Literal["independent", "random_walk"]


# ---------------------------------------------------------------------------
# Parameter transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterTransform:
    """Per-coordinate bijection between the parameter support and the real line."""

    bounds: tuple[tuple[float, float], ...]
    enabled: bool = True

    @classmethod
    def from_model(cls, model, enabled: bool = True) -> ParameterTransform:
        return cls(tuple(tuple(map(float, b)) for b in model.param_bounds()), enabled)

    @classmethod
    def identity(cls, dim: int) -> ParameterTransform:
        return cls(((-np.inf, np.inf),) * dim, enabled=False)

    def _kinds(self):
        for lo, hi in self.bounds:
            if not self.enabled or (np.isinf(lo) and np.isinf(hi)):
                yield "id", lo, hi
            elif np.isinf(hi):
                yield "lower", lo, hi
            elif np.isinf(lo):
                yield "upper", lo, hi
            else:
                yield "logit", lo, hi

    def to_z(self, theta) -> np.ndarray:
        """Unconstrained coordinates; NaN where θ is outside the support."""
        theta = np.asarray(theta, dtype=float)
        z = np.empty_like(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            for i, (kind, lo, hi) in enumerate(self._kinds()):
                v = theta[..., i]
                if kind == "id":
                    z[..., i] = v
                elif kind == "lower":
                    z[..., i] = np.where(v > lo, np.log(v - lo), np.nan)
                elif kind == "upper":
                    z[..., i] = np.where(v < hi, np.log(hi - v), np.nan)
                else:
                    z[..., i] = np.where((v > lo) & (v < hi), np.log(v - lo) - np.log(hi - v), np.nan)
        return z

    def from_z(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        theta = np.empty_like(z)
        for i, (kind, lo, hi) in enumerate(self._kinds()):
            v = z[..., i]
            if kind == "id":
                theta[..., i] = v
            elif kind == "lower":
                theta[..., i] = lo + np.exp(v)
            elif kind == "upper":
                theta[..., i] = hi - np.exp(v)
            else:
                theta[..., i] = lo + (hi - lo) * expit(v)
        return theta

    def log_jacobian(self, z) -> float:
        """log |dθ/dz| at z."""
        z = np.asarray(z, dtype=float)
        total = 0.0
        for i, (kind, lo, hi) in enumerate(self._kinds()):
            v = z[i]
            if kind in ("lower", "upper"):
                total += v
            elif kind == "logit":
                total += np.log(hi - lo) - np.logaddexp(0.0, v) - np.logaddexp(0.0, -v)
        return float(total)


# ---------------------------------------------------------------------------
# Proposal fit
# ---------------------------------------------------------------------------


def _cholesky(cov: np.ndarray) -> np.ndarray:
    if not np.any(cov):
        return np.zeros_like(cov)
    return np.linalg.cholesky(cov)


@dataclass(frozen=True)
class ProposalFit:
    """Gaussian proposal in transformed coordinates.

    ``independent`` draws N(mean, cov); ``random_walk`` draws N(z, scale * cov).
    An all-zero covariance is a point mass: it never moves and its density
    terms cancel.
    """

    mean: np.ndarray
    cov: np.ndarray
    kind: ProposalKind = "independent"
    scale: float = 1.0
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        object.__setattr__(self, "cov", np.atleast_2d(np.asarray(self.cov, dtype=float)).reshape(self.dim, self.dim))
        object.__setattr__(self, "chol", _cholesky(self.cov))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def point_mass(self) -> bool:
        return not np.any(self.cov)

    def sample(self, z_current, rng: RngLike) -> np.ndarray:
        gen = as_generator(rng)
        noise = self.chol @ gen.standard_normal(self.dim)
        if self.kind == "independent":
            return self.mean + noise
        return np.asarray(z_current, dtype=float) + np.sqrt(self.scale) * noise

    def logpdf(self, z) -> float:
        """Density of the independent proposal at z."""
        if self.dim == 0 or self.point_mass:
            return 0.0
        return float(stats.multivariate_normal.logpdf(z, mean=self.mean, cov=self.cov))

    def log_ratio(self, z_from, z_to) -> float:
        """log T(z_to -> z_from) - log T(z_from -> z_to)."""
        if self.kind == "random_walk":
            return 0.0
        return self.logpdf(z_from) - self.logpdf(z_to)


def default_rw_scale(dim: int) -> float:
    return 2.38**2 / max(dim, 1)


def fit_proposal(
    thetas,
    log_weights,
    kind: ProposalKind = "independent",
    scale: Optional[float] = None,
    transform: Optional[ParameterTransform] = None,
) -> ProposalFit:
    """Weighted mean and covariance of the cloud (in transformed coordinates)."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim == 1:
        thetas = thetas[:, None]
    lw = np.asarray(log_weights, dtype=float)
    if not np.any(np.isfinite(lw)):
        raise DegenerateWeightsError("cannot fit a proposal: no particle has positive weight")

    z = transform.to_z(thetas) if transform is not None else thetas
    W = np.exp(lw - logsumexp(lw))
    keep = W > 0
    z, W = z[keep], W[keep]
    if np.any(~np.isfinite(z)):
        raise InvalidParameterError("weighted particle outside the parameter support")

    d = z.shape[1]
    mean = W @ z
    centred = z - mean
    cov = (centred * W[:, None]).T @ centred
    cov = 0.5 * (cov + cov.T)

    if d > 0:
        jitter = 1e-9 * max(np.trace(cov) / d, 1.0)
        for _ in range(8):
            try:
                np.linalg.cholesky(cov)
                break
            except np.linalg.LinAlgError:
                cov = cov + jitter * np.eye(d)
                jitter *= 10.0
        else:
            raise DegenerateWeightsError("weighted covariance could not be made positive definite")

    return ProposalFit(mean=mean, cov=cov, kind=kind, scale=scale if scale is not None else default_rw_scale(d))


# ---------------------------------------------------------------------------
# Metropolis-Hastings
# ---------------------------------------------------------------------------


def accept(log_ratio: float, log_u: float) -> bool:
    """MH decision; a NaN ratio (e.g. -inf minus -inf) rejects."""
    return bool(log_u < log_ratio) if not np.isnan(log_ratio) else False


def mh_move(
    theta,
    log_target: Callable[[np.ndarray], float],
    proposal: ProposalFit,
    n_moves: int,
    rng: RngLike,
    transform: Optional[ParameterTransform] = None,
) -> tuple[np.ndarray, int]:
    """Run ``n_moves`` MH iterations targeting ``log_target``; returns (θ', accepted)."""
    gen = as_generator(rng)
    theta = np.asarray(theta, dtype=float)
    transform = transform or ParameterTransform.identity(theta.shape[0])

    def target_z(z):
        value = log_target(transform.from_z(z))
        return value + transform.log_jacobian(z) if np.isfinite(value) else -np.inf

    z = transform.to_z(theta)
    current = target_z(z)
    accepted = 0
    for _ in range(n_moves):
        z_new = proposal.sample(z, gen)
        proposed = target_z(z_new)
        log_ratio = proposed - current + proposal.log_ratio(z, z_new) if np.isfinite(proposed) else -np.inf
        if accept(log_ratio, np.log(gen.random())):
            z, current = z_new, proposed
            accepted += 1
    return transform.from_z(z), accepted
