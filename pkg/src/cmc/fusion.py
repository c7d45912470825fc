"""Central-node fusion of local approximations: parallel pooling, model selection, products."""

from typing import Optional, Sequence
import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp

from .compress import CompressedSet, CompressionMode, payload_count
from .core import WeightedSampleSet
from .errors import DegenerateWeightsError, EnumerationTooLargeError, handle_numerical_errors

logger = logging.getLogger("cmc.fusion")

DEFAULT_ENUMERATION_CAP = 10**6

Approximation = WeightedSampleSet | CompressedSet


@dataclass(frozen=True)
class LocalReport:
    """What one node sends to the central node."""

    approximation: Approximation
    aggregated_weight: float
    sample_count: int
    node_id: int = 0
    marginal_likelihood: Optional[float] = None
    log_marginal_likelihood: Optional[float] = None

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")
        if self.aggregated_weight < 0 or not np.isfinite(self.aggregated_weight):
            raise ValueError("aggregated weight must be finite and nonnegative")
        if self.marginal_likelihood is not None and self.marginal_likelihood < 0:
            raise ValueError(f"node {self.node_id}: negative marginal likelihood")
        if isinstance(self.approximation, CompressedSet) and not self.approximation.is_spatial:
            raise ValueError("h-specific summaries cannot be fused")

    @classmethod
    def from_samples(cls, s: WeightedSampleSet, node_id: int = 0) -> "LocalReport":
        z = log_z = None
        if s.is_weighted:
            assert s.unnorm_weights is not None
            mean_w = float(np.mean(s.unnorm_weights))
            log_z = s.log_scale + (np.log(mean_w) if mean_w > 0 else -np.inf)
            z = float(np.exp(log_z))
        return cls(s, s.total_weight(), s.size, node_id, z, log_z)

    @classmethod
    def from_compressed(
        cls, c: CompressedSet, sample_count: int, node_id: int = 0
    ) -> "LocalReport":
        """Report for a set compressed from sample_count samples; weighted sources carry Z."""
        z = log_z = None
        if c.unnorm_weights is not None:
            total = float(c.unnorm_weights.sum())
            log_z = c.log_scale + (np.log(total / sample_count) if total > 0 else -np.inf)
            z = float(np.exp(log_z))
        return cls(c, c.aggregated_weight, sample_count, node_id, z, log_z)

    @property
    def is_weighted(self) -> bool:
        return self.marginal_likelihood is not None or self.log_marginal_likelihood is not None

    @property
    def dim(self) -> int:
        return self.approximation.dim


def _particles_and_weights(report: LocalReport) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    approx = report.approximation
    if isinstance(approx, WeightedSampleSet):
        return approx.points, approx.norm_weights
    return approx.particles, approx.weights


def _sorted(reports: Sequence[LocalReport]) -> list[LocalReport]:
    if not reports:
        raise ValueError("at least one report required")
    ordered = sorted(reports, key=lambda r: r.node_id)
    if len({r.dim for r in ordered}) != 1:
        raise ValueError("all reports must share the same dimension")
    return ordered


def fuse_parallel(reports: Sequence[LocalReport]) -> CompressedSet:
    """Pool node approximations, node l reweighted by rho_l = W_l / sum_j W_j."""
    ordered = _sorted(reports)
    if len({r.is_weighted for r in ordered}) != 1:
        raise ValueError("cannot pool weighted and unweighted reports")
    totals = np.array([r.aggregated_weight for r in ordered])
    if totals.sum() <= 0:
        raise DegenerateWeightsError("degenerate pool")
    rho = totals / totals.sum()
    parts = [_particles_and_weights(r) for r in ordered]
    particles = np.vstack([p for p, _ in parts])
    weights = np.concatenate([rho_l * w for rho_l, (_, w) in zip(rho, parts)])
    weights = weights / weights.sum()

    kernel_sets = [r.approximation for r in ordered if isinstance(r.approximation, CompressedSet)]
    covariances, covariance_mode, floor = None, None, None
    if len(kernel_sets) == len(ordered) and all(c.covariances is not None for c in kernel_sets):
        covariances = np.concatenate([c.covariances for c in kernel_sets])
        modes = {c.covariance_mode for c in kernel_sets}
        covariance_mode = modes.pop() if len(modes) == 1 else "full"
        floors = [c.kernel_floor for c in kernel_sets if c.kernel_floor is not None]
        if len(floors) == len(kernel_sets):
            floor = min(floors)
    logger.debug(f"pooled {len(ordered)} reports into {particles.shape[0]} particles")
    return CompressedSet(
        particles=particles,
        weights=weights,
        aggregated_weight=float(totals.sum()),
        mode=CompressionMode.FUSED,
        covariances=covariances,
        covariance_mode=covariance_mode,
        kernel_floor=floor,
    )


def model_posterior(reports: Sequence[LocalReport]) -> NDArray[np.float64]:
    """Posterior pmf of the models: rho_l proportional to N_l * Z_l, in report order."""
    if not reports:
        raise ValueError("at least one report required")
    log_terms = np.empty(len(reports))
    for k, r in enumerate(reports):
        if r.log_marginal_likelihood is not None:
            log_z = r.log_marginal_likelihood
        elif r.marginal_likelihood is not None:
            if r.marginal_likelihood < 0:
                raise ValueError(f"node {r.node_id}: negative marginal likelihood")
            log_z = np.log(r.marginal_likelihood) if r.marginal_likelihood > 0 else -np.inf
        else:
            raise ValueError(f"node {r.node_id} carries no marginal likelihood")
        log_terms[k] = np.log(r.sample_count) + log_z
    norm = logsumexp(log_terms)
    if not np.isfinite(norm):
        raise DegenerateWeightsError("every model has zero evidence")
    pmf = np.exp(log_terms - norm)
    return pmf / pmf.sum()


@dataclass(frozen=True)
class ProductMixture:
    mixture: CompressedSet
    log_mass: float
    rejected: int


def _gaussian_components(report: LocalReport) -> CompressedSet:
    approx = report.approximation
    if not isinstance(approx, CompressedSet) or approx.covariances is None:
        raise ValueError(f"node {report.node_id}: product fusion needs a KDE compressed set")
    return approx


@handle_numerical_errors()
def _pairwise_product(
    means_a: NDArray[np.float64],
    covs_a: NDArray[np.float64],
    log_w_a: NDArray[np.float64],
    means_b: NDArray[np.float64],
    covs_b: NDArray[np.float64],
    log_w_b: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64], int]:
    """All products N(mu_a, S_a) N(mu_b, S_b) = c N(mu, S), component b varying fastest."""
    ia = np.repeat(np.arange(means_a.shape[0]), means_b.shape[0])
    ib = np.tile(np.arange(means_b.shape[0]), means_a.shape[0])
    sa, sb = covs_a[ia], covs_b[ib]
    total = sa + sb
    eig = np.linalg.eigvalsh(total)
    valid = eig[:, 0] > 1e-12 * np.maximum(1.0, eig[:, -1])
    rejected = int(np.count_nonzero(~valid))
    if rejected:
        logger.warning(f"rejected {rejected} singular product component(s)")
    ia, ib, sa, sb, total = ia[valid], ib[valid], sa[valid], sb[valid], total[valid]

    d = means_a.shape[1]
    diff = means_a[ia] - means_b[ib]
    z = np.linalg.solve(total, diff[..., None])[..., 0]
    cov = sa @ np.linalg.solve(total, sb)
    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    means = means_b[ib] + np.einsum("kij,kj->ki", sb, z)
    _, log_det = np.linalg.slogdet(total)
    log_c = -0.5 * (d * np.log(2 * np.pi) + log_det + np.einsum("ki,ki->k", diff, z))
    return means, cov, log_w_a[ia] + log_w_b[ib] + log_c, rejected


def fuse_product_of_mixtures(
    reports: Sequence[LocalReport], cap: int = DEFAULT_ENUMERATION_CAP
) -> ProductMixture:
    """Exact Gaussian product of the node mixtures, one component per tuple (m_1..m_L)."""
    ordered = _sorted(reports)
    sets = [_gaussian_components(r) for r in ordered]
    components = int(np.prod([c.size for c in sets], dtype=object))
    if components > cap:
        raise EnumerationTooLargeError(components, cap)

    first = sets[0]
    means, covs = first.particles, first.covariances
    assert covs is not None
    with np.errstate(divide="ignore"):
        log_w = np.log(first.weights)
    rejected = 0
    for c in sets[1:]:
        assert c.covariances is not None
        with np.errstate(divide="ignore"):
            log_w_b = np.log(c.weights)
        means, covs, log_w, dropped = _pairwise_product(
            means, covs, log_w, c.particles, c.covariances, log_w_b
        )
        rejected += dropped
    log_mass = float(logsumexp(log_w)) if log_w.size else -np.inf
    if not np.isfinite(log_mass):
        raise DegenerateWeightsError("product mixture has no mass")
    weights = np.exp(log_w - log_mass)
    weights = weights / weights.sum()
    logger.debug(f"product of {len(sets)} mixtures: {weights.size} components")
    mixture = CompressedSet(
        particles=means,
        weights=weights,
        aggregated_weight=float(np.exp(log_mass)),
        mode=CompressionMode.FUSED,
        covariances=covs,
        covariance_mode="full",
    )
    return ProductMixture(mixture=mixture, log_mass=log_mass, rejected=rejected)


def payload_scalars(report: LocalReport) -> int:
    """Scalars a report costs to transmit, including W for weighted sources."""
    approx = report.approximation
    if isinstance(approx, WeightedSampleSet):
        return payload_count(approx.size, approx.dim, None, weighted=report.is_weighted)
    return payload_count(approx.size, approx.dim, approx.covariance_mode, report.is_weighted)
