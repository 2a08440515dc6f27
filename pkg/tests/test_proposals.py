"""Proposal fitting, parameter transforms and the MH kernel."""

import numpy as np
import pytest
from scipy import stats

from src.errors import DegenerateWeightsError
from src.inference.proposals import ParameterTransform, ProposalFit, accept, fit_proposal, mh_move
from src.models.athletics import Athletics
from src.rng import RngStream


def _cloud(n=50, d=3, seed=0):
    gen = RngStream(seed).generator()
    return gen.normal(size=(n, d)), gen.normal(size=n)


def test_fit_matches_two_pass_moments():
    thetas, lw = _cloud()
    fit = fit_proposal(thetas, lw)
    W = np.exp(lw) / np.exp(lw).sum()
    mean = W @ thetas
    cov = ((thetas - mean) * W[:, None]).T @ (thetas - mean)
    np.testing.assert_allclose(fit.mean, mean, atol=1e-12)
    np.testing.assert_allclose(fit.cov, cov, atol=1e-12)


def test_equal_weights_match_numpy():
    thetas, _ = _cloud(seed=1)
    fit = fit_proposal(thetas, np.zeros(len(thetas)))
    np.testing.assert_allclose(fit.mean, thetas.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(fit.cov, np.cov(thetas, rowvar=False, bias=True), atol=1e-12)


def test_single_atom_gets_jitter_only():
    thetas, _ = _cloud(seed=2)
    lw = np.full(len(thetas), -np.inf)
    lw[7] = 0.0
    fit = fit_proposal(thetas, lw)
    np.testing.assert_allclose(fit.mean, thetas[7])
    np.testing.assert_allclose(fit.cov, 1e-9 * np.eye(thetas.shape[1]), rtol=1e-12, atol=0.0)
    np.linalg.cholesky(fit.cov)


def test_no_finite_weight():
    thetas, _ = _cloud()
    with pytest.raises(DegenerateWeightsError):
        fit_proposal(thetas, np.full(len(thetas), -np.inf))


def test_transform_round_trip_and_jacobian():
    transform = ParameterTransform.from_model(Athletics())  # (0, inf), (-inf, 0), (0, inf)
    theta = np.array([1.5, -0.2, 4.0])
    z = transform.to_z(theta)
    np.testing.assert_allclose(transform.from_z(z), theta)

    logit = ParameterTransform(((-1.0, 1.0),))
    z = np.array([0.3])
    h = 1e-6
    slope = (logit.from_z(z + h) - logit.from_z(z - h))[0] / (2 * h)
    assert logit.log_jacobian(z) == pytest.approx(np.log(slope), abs=1e-8)
    assert np.isnan(logit.to_z(np.array([1.5]))[0])


def test_nan_ratio_rejects():
    assert not accept(np.nan, -10.0)
    assert accept(0.0, -1e-9)


def test_exact_independent_proposal_always_accepts():
    proposal = ProposalFit(mean=np.zeros(1), cov=np.eye(1))
    log_target = lambda th: float(stats.norm.logpdf(th[0]))  # noqa: E731
    _, accepted = mh_move(np.array([0.3]), log_target, proposal, 25, RngStream(1))
    assert accepted == 25


def test_zero_variance_random_walk_stays_put():
    proposal = ProposalFit(mean=np.zeros(2), cov=np.zeros((2, 2)), kind="random_walk")
    theta = np.array([0.1, -0.4])
    moved, accepted = mh_move(theta, lambda th: -0.5 * th @ th, proposal, 10, RngStream(2))
    np.testing.assert_array_equal(moved, theta)
    assert accepted == 10


def test_random_walk_targets_standard_normal():
    proposal = ProposalFit(mean=np.zeros(1), cov=np.eye(1), kind="random_walk", scale=2.38**2)
    log_target = lambda th: -0.5 * float(th[0] ** 2)  # noqa: E731
    theta, draws = np.array([2.0]), []
    for i in range(20_000):
        theta, _ = mh_move(theta, log_target, proposal, 1, RngStream(3).split(i))
        draws.append(theta[0])
    draws = np.array(draws[1000:])
    assert abs(draws.mean()) < 0.1
    assert abs(draws.var() - 1.0) < 0.15
