import numpy as np
import pytest
from scipy.stats import multivariate_normal

from cmc.compress import (
    CompressedSet,
    CompressionMode,
    bootstrap_compress,
    cmc_estimate,
    cmc_weights,
    compress,
    kde_compress,
    kde_sample,
    ls_compress,
    ls_weights,
    mixture_logpdf,
    payload_count,
    reconstruct_Z,
)
from cmc.core import MomentFamily, WeightedSampleSet, marginal_likelihood, mc_estimate
from cmc.errors import DegenerateWeightsError, MissingWeightsError
from cmc.partition import (
    Assignment,
    assign,
    build_equal_count_partition,
    build_random_grid,
    build_uniform_grid,
    grid_shape_for_budget,
)


def _weighted_set(rng: np.random.Generator, n: int, d: int) -> WeightedSampleSet:
    return WeightedSampleSet.from_weights(rng.standard_normal((n, d)), rng.random(n) + 0.01)


def _quadratic(rng: np.random.Generator, d: int):
    coef = rng.standard_normal(d)
    curv = rng.standard_normal(d)

    def h(x):
        return x @ coef + (x**2) @ curv + 0.5

    return h


def test_h_specific_compression_is_exact():
    rng = np.random.default_rng(2024)
    for trial in range(200):
        n, d = int(rng.integers(5, 51)), int(rng.integers(1, 4))
        s = _weighted_set(rng, n, d)
        m = int(rng.integers(1, n + 1))
        a = assign(build_random_grid(s, grid_shape_for_budget(s, m), rng_seed=trial), s)
        h = _quadratic(rng, d)
        c = compress(s, a, CompressionMode.H_SPECIFIC, h=h)
        exact = mc_estimate(s, h)
        scale = float(s.norm_weights @ np.abs(h(s.points)))
        assert np.isclose(cmc_estimate(c, lambda v: v), exact, rtol=1e-12, atol=1e-12 * scale)


@pytest.mark.parametrize("mode", ["deterministic", "stochastic"])
def test_unnormalized_summary_weights_recover_evidence(mode):
    rng = np.random.default_rng(5)
    for trial in range(200):
        n, d = int(rng.integers(5, 81)), int(rng.integers(1, 4))
        points = rng.standard_normal((n, d))
        s = WeightedSampleSet.from_log_weights(points, rng.normal(rng.uniform(-400, 50), 2.0, n))
        m = int(rng.integers(1, n + 1))
        a = assign(build_random_grid(s, grid_shape_for_budget(s, m), rng_seed=trial), s)
        c = compress(s, a, mode, seed=trial)
        assert reconstruct_Z(c, s.size) == pytest.approx(marginal_likelihood(s), rel=1e-12)
        assert c.aggregated_weight == pytest.approx(s.total_weight(), rel=1e-12)
        assert c.payload_scalars() == payload_count(c.size, d, weighted=True)


def test_unweighted_source_has_no_evidence():
    s = WeightedSampleSet.from_weights(np.arange(10.0))
    c = compress(s, assign(build_uniform_grid(s, (2,)), s))
    with pytest.raises(MissingWeightsError):
        reconstruct_Z(c, s.size)


def test_uniform_weights_give_region_fractions():
    s = WeightedSampleSet.from_weights(np.arange(4.0))
    a = Assignment.from_labels(np.array([0, 1, 1, 1]), 2)
    np.testing.assert_allclose(cmc_weights(s, a), [0.25, 0.75])


def test_deterministic_compression_preserves_the_mean():
    rng = np.random.default_rng(9)
    s = _weighted_set(rng, 300, 2)
    c = compress(s, assign(build_uniform_grid(s, (4, 2)), s))
    np.testing.assert_allclose(c.weights @ c.particles, s.norm_weights @ s.points, atol=1e-12)
    assert c.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_one_sample_per_region_reproduces_the_set():
    s = WeightedSampleSet.from_weights(np.random.default_rng(3).standard_normal(20))
    c = compress(s, assign(build_equal_count_partition(s, 20), s))
    np.testing.assert_allclose(np.sort(c.particles[:, 0]), np.sort(s.points[:, 0]))
    np.testing.assert_allclose(c.weights, np.full(20, 0.05))


def test_empty_regions_are_dropped():
    s = WeightedSampleSet.from_weights([0.0, 0.1, 0.9, 1.0])
    a = assign(build_uniform_grid(s, (3,)), s)
    np.testing.assert_array_equal(a.counts, [2, 0, 2])
    c = compress(s, a)
    assert c.size == 2
    np.testing.assert_allclose(c.particles[:, 0], [0.05, 0.95])


def test_stochastic_particles_are_reproducible_members_of_the_set():
    rng = np.random.default_rng(12)
    s = _weighted_set(rng, 200, 2)
    a = assign(build_uniform_grid(s, (2, 2)), s)
    first = compress(s, a, "stochastic", seed=77)
    second = compress(s, a, "stochastic", seed=77)
    np.testing.assert_array_equal(first.particles, second.particles)
    for p in first.particles:
        assert np.any(np.all(s.points == p, axis=1))
    np.testing.assert_allclose(first.weights, compress(s, a).weights)
    with pytest.raises(ValueError):
        compress(s, a, "stochastic")


def test_kde_covariances_are_regularized():
    rng = np.random.default_rng(4)
    s = _weighted_set(rng, 500, 2)
    c = kde_compress(s, assign(build_uniform_grid(s, (3, 2)), s), "full", delta=0.1)
    assert c.covariances.shape == (c.size, 2, 2)
    assert np.linalg.eigvalsh(c.covariances).min() >= 0.1 - 1e-12
    assert c.payload_scalars() == c.size * 6 + 1


def test_kde_single_region_is_the_moment_matched_gaussian():
    rng = np.random.default_rng(6)
    s = _weighted_set(rng, 300, 2)
    c = kde_compress(s, Assignment.single(s.size), "full", delta=0.2)
    mean = s.norm_weights @ s.points
    centred = s.points - mean
    cov = (centred * s.norm_weights[:, None]).T @ centred
    np.testing.assert_allclose(c.particles[0], mean)
    np.testing.assert_allclose(c.covariances[0], cov + 0.2 * np.eye(2), atol=1e-12)


def test_shared_diagonal_kernels_are_identical():
    rng = np.random.default_rng(8)
    s = _weighted_set(rng, 200, 3)
    c = kde_compress(s, assign(build_uniform_grid(s, (2, 2, 1)), s), "shared_diagonal")
    assert np.all(c.covariances == c.covariances[0])
    assert np.count_nonzero(c.covariances[0] - np.diag(np.diag(c.covariances[0]))) == 0
    assert c.payload_scalars() == c.size * 7 + 1


def test_kde_rejects_nonpositive_delta():
    s = WeightedSampleSet.from_weights(np.arange(5.0))
    with pytest.raises(ValueError):
        kde_compress(s, Assignment.single(5), delta=0.0)


def _kernel_set(covariances, floor=None) -> CompressedSet:
    return CompressedSet(
        particles=np.zeros((1, 2)),
        weights=np.ones(1),
        aggregated_weight=1.0,
        mode=CompressionMode.DETERMINISTIC,
        covariances=np.asarray(covariances, dtype=float)[None],
        covariance_mode="full",
        kernel_floor=floor,
    )


def test_kernels_respect_the_delta_floor():
    s = WeightedSampleSet.from_weights(np.random.default_rng(2).standard_normal((40, 2)))
    assert kde_compress(s, Assignment.single(40), delta=0.3).kernel_floor == 0.3
    assert _kernel_set(np.eye(2), floor=0.5).size == 1
    with pytest.raises(ValueError, match="below the floor"):
        _kernel_set(np.diag([1.0, 0.05]), floor=0.1)
    with pytest.raises(ValueError, match="positive definite"):
        _kernel_set([[1.0, 2.0], [2.0, 1.0]])


def test_mixture_logpdf_matches_scipy():
    c = CompressedSet(
        particles=np.array([[0.0, 0.0], [2.0, -1.0]]),
        weights=np.array([0.3, 0.7]),
        aggregated_weight=1.0,
        mode=CompressionMode.DETERMINISTIC,
        covariances=np.array([np.eye(2), [[2.0, 0.5], [0.5, 1.0]]]),
        covariance_mode="full",
    )
    x = np.array([[0.5, 0.5], [-1.0, 3.0]])
    expected = np.log(
        0.3 * multivariate_normal(c.particles[0], c.covariances[0]).pdf(x)
        + 0.7 * multivariate_normal(c.particles[1], c.covariances[1]).pdf(x)
    )
    np.testing.assert_allclose(mixture_logpdf(c, x), expected, rtol=1e-10)


def test_kde_sample_follows_the_mixture():
    c = CompressedSet(
        particles=np.array([[-1.0], [3.0]]),
        weights=np.array([0.25, 0.75]),
        aggregated_weight=1.0,
        mode=CompressionMode.DETERMINISTIC,
        covariances=np.array([[[0.5]], [[0.5]]]),
        covariance_mode="full",
    )
    draws = kde_sample(c, 20_000, seed=3)
    assert draws.size == 20_000
    assert draws.points.mean() == pytest.approx(2.0, abs=0.05)


def test_summary_weights_must_be_normalized():
    with pytest.raises(DegenerateWeightsError):
        CompressedSet(
            particles=np.zeros((2, 1)),
            weights=np.array([0.5, 0.6]),
            aggregated_weight=1.0,
            mode=CompressionMode.DETERMINISTIC,
        )


def test_ls_weights_match_the_first_two_moments():
    s = WeightedSampleSet.from_weights(np.random.default_rng(1).standard_normal(500))
    fam = MomentFamily.powers(2)
    solution = ls_weights([[-1.0], [0.0], [1.0]], s, fam)
    assert not solution.rank_deficient
    assert solution.residual_norm < 1e-10
    c = ls_compress([[-1.0], [0.0], [1.0]], s, fam)
    assert c.weights.sum() == pytest.approx(1.0)
    for h in fam.functions:
        assert cmc_estimate(c, h) == pytest.approx(mc_estimate(s, h), abs=1e-10)


def test_ls_weights_flag_rank_deficiency():
    s = WeightedSampleSet.from_weights(np.arange(6.0))
    solution = ls_weights([[0.0], [0.0], [1.0]], s, MomentFamily.powers(2))
    assert solution.rank_deficient
    assert solution.rank == 2


def test_bootstrap_keeps_the_aggregated_weight():
    rng = np.random.default_rng(0)
    s = _weighted_set(rng, 100, 2)
    c = bootstrap_compress(s, 10, seed=4)
    assert c.size == 10
    np.testing.assert_allclose(c.weights, 0.1)
    assert c.aggregated_weight == pytest.approx(s.total_weight())
    with pytest.raises(ValueError):
        bootstrap_compress(s, 101, seed=4)
