"""Exact filtering, smoothing and marginal likelihood for linear-Gaussian models.

Every Monte Carlo component is checked against these recursions, so they are
kept plain: predict, Joseph-form update, Rauch-Tung-Striebel backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from src.errors import InvalidParameterError, KalmanError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class KalmanState:
    """Moments of x_t given y_{1:t}, plus the running log p(y_{1:t})."""

    mean: np.ndarray
    cov: np.ndarray
    loglik: float = 0.0
    t: int = 0


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def kalman_predict(state: KalmanState, F: np.ndarray, Q: np.ndarray) -> KalmanState:
    mean = F @ state.mean
    cov = _symmetrize(F @ state.cov @ F.T + Q)
    return KalmanState(mean=mean, cov=cov, loglik=state.loglik, t=state.t)


def kalman_update(pred: KalmanState, y, H: np.ndarray, R: np.ndarray) -> KalmanState:
    """Condition the predicted moments on y_t; NaN observations are skipped."""
    t = pred.t + 1
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(np.isnan(y)):
        return KalmanState(mean=pred.mean, cov=pred.cov, loglik=pred.loglik, t=t)

    resid = y - H @ pred.mean
    S = _symmetrize(H @ pred.cov @ H.T + R)
    try:
        factor = linalg.cho_factor(S, lower=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise KalmanError(t, S, str(exc)) from exc

    gain = linalg.cho_solve(factor, H @ pred.cov).T
    mean = pred.mean + gain @ resid

    # Joseph form keeps the covariance symmetric PSD over long runs
    I_KH = np.eye(pred.cov.shape[0]) - gain @ H
    cov = _symmetrize(I_KH @ pred.cov @ I_KH.T + gain @ R @ gain.T)

    logdet = 2.0 * np.sum(np.log(np.diag(factor[0])))
    maha = resid @ linalg.cho_solve(factor, resid)
    increment = -0.5 * (y.size * LOG_2PI + logdet + maha)
    return KalmanState(mean=mean, cov=cov, loglik=pred.loglik + increment, t=t)


def kalman_step(state: KalmanState, y, F, Q, H, R) -> KalmanState:
    return kalman_update(kalman_predict(state, F, Q), y, H, R)


def kalman_filter(prior_mean, prior_cov, ys, F, Q, H, R) -> list[KalmanState]:
    """Run the filter over ys; (prior_mean, prior_cov) is the law of x_1."""
    prior = KalmanState(
        mean=np.atleast_1d(np.asarray(prior_mean, dtype=float)),
        cov=np.atleast_2d(np.asarray(prior_cov, dtype=float)),
    )
    states: list[KalmanState] = []
    current = prior
    for i, y in enumerate(ys):
        current = kalman_update(current if i == 0 else kalman_predict(current, F, Q), y, H, R)
        states.append(current)
    return states


def rts_smoother(filtered: list[KalmanState], F, Q) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed means (T, d) and covariances (T, d, d) from a completed forward pass."""
    T = len(filtered)
    if T == 0:
        raise InvalidParameterError("rts_smoother needs at least one filtered state")
    d = filtered[0].mean.shape[0]
    means = np.empty((T, d))
    covs = np.empty((T, d, d))
    means[-1] = filtered[-1].mean
    covs[-1] = filtered[-1].cov

    for t in range(T - 2, -1, -1):
        f = filtered[t]
        pred_cov = _symmetrize(F @ f.cov @ F.T + Q)
        try:
            factor = linalg.cho_factor(pred_cov, lower=True)
        except (linalg.LinAlgError, ValueError) as exc:
            raise KalmanError(t + 1, pred_cov, "predicted covariance in smoother") from exc
        gain = linalg.cho_solve(factor, F @ f.cov).T
        means[t] = f.mean + gain @ (means[t + 1] - F @ f.mean)
        covs[t] = _symmetrize(f.cov + gain @ (covs[t + 1] - pred_cov) @ gain.T)
    return means, covs
