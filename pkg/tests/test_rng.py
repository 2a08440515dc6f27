import numpy as np
import pytest
from scipy import stats

from src.errors import DegenerateWeightsError, InvalidParameterError
from src.rng import Purpose, RngStream, resample_indices, sample_standard, split


def test_same_stream_same_draws():
    a = RngStream(3, (1, 2)).generator().random(5)
    b = RngStream(3, (1, 2)).generator().random(5)
    assert np.array_equal(a, b)


def test_children_are_distinct():
    root = RngStream(3)
    a = split(root, 0).generator().random(5)
    b = split(root, 1).generator().random(5)
    assert not np.array_equal(a, b)
    assert root.split(Purpose.MOVE).path == (int(Purpose.MOVE),)


def test_stream_id_depends_on_path_only():
    assert RngStream(5, (1, 2)).stream_id == RngStream(9, (1, 2)).stream_id
    assert RngStream(5, (1, 2)).stream_id != RngStream(5, (1, 3)).stream_id
    assert 0 <= RngStream(5, (1, 2)).stream_id < 2**64


def test_negative_tag_rejected():
    with pytest.raises(InvalidParameterError):
        RngStream(1).split(-1)


def test_exponential_and_gamma_moments():
    n = 100_000
    e = sample_standard("exponential", RngStream(1), rate=2.0, size=n)
    assert abs(e.mean() - 0.5) < 5 * 0.5 / np.sqrt(n)

    g = sample_standard("gamma", RngStream(2), shape=3.0, rate=2.0, size=n)
    assert abs(g.mean() - 1.5) < 5 * np.sqrt(0.75 / n)


def test_poisson_mean_zero_is_zero():
    assert np.all(sample_standard("poisson", RngStream(1), mean=0.0, size=100) == 0)


@pytest.mark.parametrize("kwargs", [
    {"dist": "exponential", "rate": 0.0},
    {"dist": "gamma", "shape": -1.0, "rate": 1.0},
    {"dist": "poisson", "mean": -0.5},
    {"dist": "cauchy"},
])
def test_invalid_parameters(kwargs):
    dist = kwargs.pop("dist")
    with pytest.raises(InvalidParameterError):
        sample_standard(dist, RngStream(0), size=3, **kwargs)


def test_single_positive_weight_always_chosen():
    idx = resample_indices([0.0, 0.0, 3.0, 0.0], 50, "multinomial", RngStream(0))
    assert np.all(idx == 2)


def test_systematic_equal_weights_picks_each_once():
    idx = resample_indices(np.ones(4), 4, "systematic", RngStream(11))
    assert sorted(idx.tolist()) == [0, 1, 2, 3]


def test_multinomial_frequencies():
    w = np.array([0.1, 0.2, 0.7])
    n = 100_000
    counts = np.bincount(resample_indices(w, n, "multinomial", RngStream(5)), minlength=3)
    se = np.sqrt(n * w * (1 - w))
    assert np.all(np.abs(counts - n * w) < 5 * se)


@pytest.mark.parametrize("weights", [[0.0, 0.0], [np.nan, 1.0], [-1.0, 2.0], []])
def test_degenerate_weights(weights):
    with pytest.raises(DegenerateWeightsError):
        resample_indices(weights, 3, "multinomial", RngStream(0))


def test_unknown_scheme():
    with pytest.raises(InvalidParameterError):
        resample_indices([1.0], 1, "stratified", RngStream(0))


def test_sibling_streams_look_independent():
    a = RngStream(7).split(3).generator().random(1000)
    b = RngStream(7).split(4).generator().random(1000)
    assert stats.ks_2samp(a, b).pvalue > 1e-3


def test_split_is_path_sensitive():
    root = RngStream(7)
    a = root.split(1).split(2).generator().random(100)
    b = root.split(2).split(1).generator().random(100)
    assert not np.array_equal(a, b)


def test_gamma_with_rate_parametrisation():
    n = 100_000
    g = sample_standard("gamma", RngStream(3), shape=4.0, rate=8.0, size=n)
    assert abs(g.mean() - 0.5) < 5 * np.sqrt(4.0 / 64.0 / n)
    e = sample_standard("exponential", RngStream(4), rate=0.2, size=n)
    assert abs(e.mean() - 5.0) < 5 * 5.0 / np.sqrt(n)


def test_systematic_exact_for_integer_counts():
    idx = resample_indices([0.5, 0.5], 2, "systematic", RngStream(2))
    assert sorted(idx.tolist()) == [0, 1]
