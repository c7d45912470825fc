import numpy as np
import pytest

from cmc.compress import CompressedSet, CompressionMode, compress, kde_compress, mixture_logpdf
from cmc.core import WeightedSampleSet
from cmc.errors import EnumerationTooLargeError
from cmc.fusion import (
    LocalReport,
    fuse_parallel,
    fuse_product_of_mixtures,
    model_posterior,
    payload_scalars,
)
from cmc.partition import assign, build_uniform_grid


def _kernel_set(means, weights, variances) -> CompressedSet:
    return CompressedSet(
        particles=np.asarray(means, dtype=float)[:, None],
        weights=np.asarray(weights, dtype=float),
        aggregated_weight=1.0,
        mode=CompressionMode.DETERMINISTIC,
        covariances=np.asarray(variances, dtype=float)[:, None, None],
        covariance_mode="full",
    )


def _evidence_report(node_id: int, z: float, n: int = 10) -> LocalReport:
    s = WeightedSampleSet.from_weights(np.zeros((n, 1)), np.full(n, z))
    return LocalReport(s, n * z, n, node_id, marginal_likelihood=z)


def test_identical_unweighted_reports_halve_the_weights():
    s = WeightedSampleSet.from_weights(np.arange(4.0))
    fused = fuse_parallel([LocalReport.from_samples(s, 0), LocalReport.from_samples(s, 1)])
    assert fused.size == 8
    np.testing.assert_allclose(fused.weights, np.full(8, 1 / 8))
    assert fused.aggregated_weight == 8.0


def test_pooling_weighted_reports_matches_the_concatenated_set():
    rng = np.random.default_rng(1)
    x1, x2 = rng.standard_normal((30, 2)), rng.standard_normal((50, 2))
    lw1, lw2 = rng.normal(-5.0, 1.0, 30), rng.normal(-2.0, 1.0, 50)
    reports = [
        LocalReport.from_samples(WeightedSampleSet.from_log_weights(x2, lw2), node_id=1),
        LocalReport.from_samples(WeightedSampleSet.from_log_weights(x1, lw1), node_id=0),
    ]
    fused = fuse_parallel(reports)
    expected = np.exp(np.concatenate([lw1, lw2]))
    np.testing.assert_allclose(fused.particles, np.vstack([x1, x2]))
    np.testing.assert_allclose(fused.weights, expected / expected.sum(), rtol=1e-10)


def test_weighted_and_unweighted_reports_do_not_mix():
    unweighted = LocalReport.from_samples(WeightedSampleSet.from_weights(np.arange(3.0)), 0)
    with pytest.raises(ValueError):
        fuse_parallel([unweighted, _evidence_report(1, 1.0)])


def test_compressed_reports_keep_their_kernels():
    rng = np.random.default_rng(2)
    reports = []
    for node in range(3):
        s = WeightedSampleSet.from_weights(rng.standard_normal((100, 2)) + node)
        c = kde_compress(s, assign(build_uniform_grid(s, (2, 2)), s))
        reports.append(LocalReport.from_compressed(c, s.size, node))
    fused = fuse_parallel(reports)
    assert fused.covariances.shape == (fused.size, 2, 2)
    assert fused.weights.sum() == pytest.approx(1.0)


def test_h_specific_summaries_cannot_be_reported():
    s = WeightedSampleSet.from_weights(np.arange(6.0))
    c = compress(s, assign(build_uniform_grid(s, (2,)), s), "h_specific", h=lambda x: x[:, 0])
    with pytest.raises(ValueError):
        LocalReport.from_compressed(c, s.size)


def test_model_posterior_is_proportional_to_evidence():
    pmf = model_posterior([_evidence_report(1, 1.0), _evidence_report(3, 3.0)])
    np.testing.assert_allclose(pmf, [0.25, 0.75])


def test_model_posterior_in_log_domain():
    s = WeightedSampleSet.from_weights(np.zeros((5, 1)), np.ones(5))
    reports = [
        LocalReport(s, 5.0, 5, 0, log_marginal_likelihood=-1000.0),
        LocalReport(s, 5.0, 5, 1, log_marginal_likelihood=-1001.0),
    ]
    pmf = model_posterior(reports)
    assert pmf[0] == pytest.approx(1.0 / (1.0 + np.exp(-1.0)))
    with pytest.raises(ValueError):
        model_posterior([LocalReport.from_samples(WeightedSampleSet.from_weights([0.0]))])


def test_product_of_mixtures_matches_pointwise_product():
    a = _kernel_set([-1.0, 0.0, 2.0], [0.2, 0.5, 0.3], [0.5, 1.0, 0.8])
    b = _kernel_set([0.5, 1.5, -2.0], [0.4, 0.4, 0.2], [1.2, 0.6, 2.0])
    product = fuse_product_of_mixtures(
        [LocalReport.from_compressed(a, 30, 0), LocalReport.from_compressed(b, 30, 1)]
    )
    assert product.mixture.size == 9
    assert product.rejected == 0
    grid = np.linspace(-4.0, 4.0, 161)[:, None]
    dense = mixture_logpdf(a, grid) + mixture_logpdf(b, grid)
    fused = mixture_logpdf(product.mixture, grid) + product.log_mass
    np.testing.assert_allclose(fused, dense, rtol=1e-8, atol=1e-8)


def test_product_enumeration_is_capped():
    a = _kernel_set([0.0, 1.0, 2.0], [0.2, 0.3, 0.5], [1.0, 1.0, 1.0])
    reports = [LocalReport.from_compressed(a, 10, 0), LocalReport.from_compressed(a, 10, 1)]
    with pytest.raises(EnumerationTooLargeError) as info:
        fuse_product_of_mixtures(reports, cap=8)
    assert info.value.components == 9


def test_product_needs_kernels():
    s = WeightedSampleSet.from_weights(np.arange(4.0))
    with pytest.raises(ValueError):
        fuse_product_of_mixtures([LocalReport.from_samples(s, 0)])


def test_report_payload():
    a = _kernel_set([0.0, 1.0], [0.5, 0.5], [1.0, 1.0])
    assert payload_scalars(LocalReport.from_compressed(a, 10)) == 2 * 3
    assert payload_scalars(_evidence_report(0, 2.0, n=4)) == 4 * 2 + 1
