"""IBIS on the linear-Gaussian model, where every answer is known by quadrature."""

import numpy as np
import pytest
from scipy.special import logsumexp

from src.errors import DegenerateWeightsError
from src.inference.ibis import IbisState, ThetaCloud, evidence_increment, ibis_init, ibis_run, ibis_step
from src.kalman import KalmanState
from src.models.schema import Smc2Config
from src.rng import RngStream
from tests.helpers import grid_posterior, lg_data, lg_rho_model, mc_z


def _atoms_state(model, atoms, config):
    thetas = np.array(atoms, dtype=float)[:, None]
    attachments = []
    for th in thetas:
        _, _, _, _, m1, P1 = model.kalman_system(th)
        attachments.append(KalmanState(mean=m1, cov=P1))
    cloud = ThetaCloud(thetas=thetas, log_weights=np.zeros(len(thetas)), attachments=tuple(attachments))
    return IbisState(model=model, cloud=cloud, config=config)


def test_evidence_increment_is_weighted_average():
    assert evidence_increment([0.0, 0.0], [0.0, np.log(3.0)]) == pytest.approx(np.log(2.0))
    assert evidence_increment([0.0, -np.inf], [np.log(5.0), np.nan]) == pytest.approx(np.log(5.0))
    with pytest.raises(DegenerateWeightsError):
        evidence_increment([-np.inf], [0.0])


def test_discrete_prior_gives_exact_posterior():
    model = lg_rho_model()
    ys = lg_data(4)
    atoms = [-0.5, 0.2, 0.8]
    state = _atoms_state(model, atoms, Smc2Config(n_theta=3, ess_threshold=0.01))
    rng = RngStream(0)
    for t in (1, 2, 3, 4):
        state = ibis_step(state, ys, rng)
        loglik = np.array([model.exact_loglik(np.array([a]), ys[:t]) for a in atoms])
        np.testing.assert_allclose(state.cloud.norm_weights, np.exp(loglik - logsumexp(loglik)), atol=1e-12)
        assert state.log_evidence == pytest.approx(logsumexp(loglik) - np.log(3), abs=1e-10)
    assert not any(d.resampled for d in state.diagnostics)


def test_resample_move_resets_weights():
    model = lg_rho_model()
    ys = lg_data(3)
    config = Smc2Config(n_theta=20, ess_threshold=0.99)
    state = ibis_init(model, config, RngStream(1))
    state = ibis_step(state, ys, RngStream(1))
    record = state.diagnostics[-1]
    assert record.resampled
    assert 0.0 <= record.acceptance_rate <= 1.0
    assert state.cloud.size == 20
    np.testing.assert_array_equal(state.cloud.log_weights, np.zeros(20))
    assert all(k.t == 1 for k in state.cloud.attachments)
    assert np.all(np.abs(state.cloud.thetas) < 1.0)


def test_needs_exact_model():
    from src.models.volatility import OneFactorSV

    with pytest.raises(ValueError):
        ibis_init(OneFactorSV(), Smc2Config(n_theta=4), RngStream(0))


@pytest.mark.slow
def test_posterior_and_evidence_match_quadrature():
    model = lg_rho_model()
    ys = lg_data(50, seed=21)
    mean, sd, log_evidence = grid_posterior(model, ys)

    runs = [ibis_run(model, ys, Smc2Config(n_theta=500, moves=2), RngStream(5 + r)) for r in range(20)]
    summaries = [s.cloud.summary(model.param_names)["rho"] for s in runs]
    assert mc_z([s.mean for s in summaries], mean) < 3
    assert mc_z([s.var for s in summaries], sd**2) < 3
    assert mc_z([np.exp(s.log_evidence - log_evidence) for s in runs], 1.0) < 3
    assert all(s.diagnostics[-1].cum_log_evidence == s.log_evidence for s in runs)


@pytest.mark.slow
def test_evidence_increment_does_not_depend_on_resampling():
    model = lg_rho_model()
    ys = lg_data(20, seed=22)
    exact = grid_posterior(model, ys)[2] - grid_posterior(model, ys[:-1])[2]

    def last_increments(ess_threshold):
        runs = [ibis_run(model, ys, Smc2Config(n_theta=200, ess_threshold=ess_threshold), RngStream(800 + r))
                for r in range(50)]
        resampled = [any(d.resampled for d in s.diagnostics) for s in runs]
        return np.array([np.exp(s.diagnostics[-1].log_Lhat_t - exact) for s in runs]), resampled

    forced, forced_resampled = last_increments(0.999)
    held, held_resampled = last_increments(1e-6)
    assert all(forced_resampled) and not any(held_resampled)

    se = np.hypot(forced.std(ddof=1), held.std(ddof=1)) / np.sqrt(50)
    assert abs(forced.mean() - held.mean()) < 3 * se
    assert mc_z(forced, 1.0) < 3
