import numpy as np
import pytest

from cmc.core import (
    MomentFamily,
    WeightedSampleSet,
    log_marginal_likelihood,
    marginal_likelihood,
    mc_estimate,
    normalize_weights,
    read_csv,
    resample_indices,
    weighted_covariance,
)
from cmc.errors import DegenerateWeightsError, MissingWeightsError, NonFiniteIntegrandError


def test_normalize_weights_sums_to_one():
    np.testing.assert_allclose(normalize_weights([1.0, 3.0]), [0.25, 0.75])


@pytest.mark.parametrize("weights", [[0.0, 0.0], [1.0, -1.0], [1.0, np.nan], []])
def test_normalize_weights_rejects_degenerate(weights):
    with pytest.raises(DegenerateWeightsError):
        normalize_weights(weights)


def test_unweighted_set_has_uniform_weights_and_no_evidence():
    s = WeightedSampleSet.from_weights(np.arange(4.0))
    assert s.dim == 1
    assert not s.is_weighted
    np.testing.assert_allclose(s.norm_weights, 0.25)
    assert s.total_weight() == 4.0
    with pytest.raises(MissingWeightsError):
        marginal_likelihood(s)


def test_log_weights_keep_the_evidence_scale():
    s = WeightedSampleSet.from_log_weights([[0.0], [1.0]], [np.log(2.0) - 800, np.log(4.0) - 800])
    assert s.log_scale == pytest.approx(np.log(4.0) - 800)
    assert log_marginal_likelihood(s) == pytest.approx(np.log(3.0) - 800)
    np.testing.assert_allclose(s.norm_weights, [1 / 3, 2 / 3])


def test_all_minus_infinity_log_weights_are_degenerate():
    with pytest.raises(DegenerateWeightsError):
        WeightedSampleSet.from_log_weights([[0.0], [1.0]], [-np.inf, -np.inf])


def test_mc_estimate_of_second_moment():
    rng = np.random.default_rng(7)
    s = WeightedSampleSet.from_weights(rng.standard_normal((1000, 1)))
    assert mc_estimate(s, lambda x: x[:, 0] ** 2) == pytest.approx(1.0, abs=0.15)


def test_mc_estimate_uses_normalized_weights():
    s = WeightedSampleSet.from_weights([[1.0], [3.0]], [3.0, 1.0])
    assert mc_estimate(s, lambda x: x[:, 0]) == pytest.approx(1.5)
    assert marginal_likelihood(s) == pytest.approx(2.0)


def test_non_finite_integrand_is_reported():
    s = WeightedSampleSet.from_weights([[0.0], [1.0], [2.0]])
    with pytest.raises(NonFiniteIntegrandError) as info:
        mc_estimate(s, lambda x: np.log(x[:, 0]))
    assert info.value.count == 1


def test_systematic_resampling_counts_are_floor_or_ceil():
    rng = np.random.default_rng(3)
    idx = resample_indices(np.array([0.5, 0.25, 0.25]), 4, rng, "systematic")
    np.testing.assert_array_equal(np.bincount(idx, minlength=3), [2, 1, 1])


def test_resampling_a_point_mass():
    rng = np.random.default_rng(0)
    idx = resample_indices(np.array([0.0, 1.0, 0.0]), 50, rng)
    assert np.all(idx == 1)


def test_weighted_covariance_matches_numpy():
    rng = np.random.default_rng(11)
    points = rng.standard_normal((40, 3))
    w = normalize_weights(rng.random(40))
    expected = np.cov(points.T, aweights=w, bias=True)
    np.testing.assert_allclose(weighted_covariance(points, w), expected, atol=1e-12)


def test_moment_family_powers():
    fam = MomentFamily.powers(3)
    x = np.array([[2.0], [-1.0]])
    assert fam.size == 3
    np.testing.assert_allclose([f(x) for f in fam.functions], [[2, -1], [4, 1], [8, -1]])
    np.testing.assert_allclose(fam.loss_weights, np.ones(3))
    with pytest.raises(ValueError):
        fam.with_weights([1.0, 0.0, 1.0])


def test_read_csv_with_weight_column(tmp_path):
    path = tmp_path / "samples.csv"
    path.write_text("x_2,x_1,w\n1.0,0.0,2.0\n3.0,2.0,6.0\n")
    s = read_csv(path)
    np.testing.assert_allclose(s.points, [[0.0, 1.0], [2.0, 3.0]])
    np.testing.assert_allclose(s.norm_weights, [0.25, 0.75])
    assert s.total_weight() == pytest.approx(8.0)


def test_read_csv_without_coordinates(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(path)
