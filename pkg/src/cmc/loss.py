"""Compression losses, per-region costs and stratified-estimator oracles."""

from typing import Callable, Sequence
import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

from .compress import CompressedSet, CompressionMode, cmc_estimate
from .core import Integrand, MomentFamily, WeightedSampleSet, evaluate_integrand, mc_estimate
from .errors import IntegrationError
from .partition import Assignment, RefinementMode

logger = logging.getLogger("cmc.loss")

RegionSampler = Callable[[np.random.Generator, int], NDArray[np.float64]]
"""Draws k points, shape (k, d), from one region's restricted target."""


@dataclass(frozen=True)
class RegionCosts:
    costs: NDArray[np.float64]
    mode: RefinementMode
    total: float


def loss_single(i_n: float, i_m: float) -> float:
    """Squared error between the full-sample and compressed estimates."""
    return float((i_n - i_m) ** 2)


def _identity(x: NDArray[np.float64]) -> NDArray[np.float64]:
    return x


def loss_family(s: WeightedSampleSet, c: CompressedSet, fam: MomentFamily) -> float:
    """Weighted sum of squared errors over the functions of a moment family."""
    if c.mode == CompressionMode.H_SPECIFIC:
        if fam.size != 1 or fam.functions[0] is not c.integrand:
            raise ValueError("h-specific sets only support the single function they summarize")
        return float(fam.loss_weights[0]) * loss_single(
            mc_estimate(s, fam.functions[0]), cmc_estimate(c, _identity)
        )
    errors = np.array([mc_estimate(s, h) - cmc_estimate(c, h) for h in fam.functions])
    return float(fam.loss_weights @ errors**2)


def relative_loss_weights(
    s: WeightedSampleSet, fam: MomentFamily, floor: float = 1e-12
) -> MomentFamily:
    """Loss weights 1 / I(h_r)^2, with the squared estimate floored to stay finite.

    Estimates close to zero make these weights explode; the floor only bounds the damage.
    """
    estimates = np.array([mc_estimate(s, h) for h in fam.functions])
    squared = estimates**2
    if np.any(squared < floor):
        logger.warning(f"{int(np.sum(squared < floor))} estimate(s) near zero; weights floored")
    return fam.with_weights(1.0 / np.maximum(squared, floor))


def _region_sums(
    s: WeightedSampleSet, a: Assignment, values: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    if a.labels.shape[0] != s.size:
        raise ValueError(f"assignment covers {a.labels.shape[0]} samples, set has {s.size}")
    mass = np.bincount(a.labels, weights=s.norm_weights, minlength=a.region_count)
    moment = np.bincount(a.labels, weights=s.norm_weights * values, minlength=a.region_count)
    return mass, moment


def region_costs_deterministic(s: WeightedSampleSet, a: Assignment, h: Integrand) -> RegionCosts:
    """Signed costs sum_{J_m} wbar_j [h(x_j) - h(s_m)]; the loss is the squared sum."""
    values = evaluate_integrand(h, s.points)
    mass, moment = _region_sums(s, a, values)
    costs = np.zeros(a.region_count)
    live = np.flatnonzero(mass > 0)
    if live.size:
        centroids = np.array(
            [s.norm_weights[a.index_sets[m]] @ s.points[a.index_sets[m]] / mass[m] for m in live]
        )
        costs[live] = moment[live] - mass[live] * evaluate_integrand(h, centroids)
    return RegionCosts(costs, RefinementMode.DETERMINISTIC, float(costs.sum() ** 2))


def region_costs_stochastic(s: WeightedSampleSet, a: Assignment, h: Integrand) -> RegionCosts:
    """Nonnegative costs a_m^2 times the within-region variance of h; the loss is their sum."""
    values = evaluate_integrand(h, s.points)
    mass, moment = _region_sums(s, a, values)
    costs = np.zeros(a.region_count)
    for m in np.flatnonzero(mass > 0):
        idx = a.index_sets[m]
        centred = values[idx] - moment[m] / mass[m]
        costs[m] = mass[m] * (s.norm_weights[idx] @ centred**2)
    return RegionCosts(costs, RefinementMode.STOCHASTIC, float(costs.sum()))


@dataclass(frozen=True)
class StratifiedOracle:
    """True per-region masses, means and variances of h, with per-region sample counts."""

    region_masses: NDArray[np.float64]
    region_means: NDArray[np.float64]
    region_variances: NDArray[np.float64]
    samples_per_region: NDArray[np.intp]

    def __post_init__(self) -> None:
        m = self.region_masses.shape[0]
        for name in ("region_means", "region_variances", "samples_per_region"):
            if getattr(self, name).shape != (m,):
                raise ValueError(f"{name} must hold one entry per region")
        if np.any(self.region_variances < 0):
            raise IntegrationError("negative region variance")

    @property
    def region_count(self) -> int:
        return self.region_masses.shape[0]

    @property
    def mean(self) -> float:
        return float(self.region_masses @ self.region_means)


def _quad(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    value, _ = integrate.quad(f, lo, hi, epsabs=tol, epsrel=tol, limit=200)
    return float(value)


def build_oracle_1d(
    pdf: Callable[[float], float],
    h: Callable[[float], float],
    edges: ArrayLike,
    samples_per_region: int | Sequence[int],
    tol: float = 1e-10,
) -> StratifiedOracle:
    """Per-interval masses and moments of h under a 1-D density by adaptive quadrature.

    ``edges`` holds the M+1 interval endpoints (infinite ends allowed).
    """
    bounds = np.asarray(edges, dtype=float)
    m = bounds.size - 1
    if m < 1 or np.any(np.diff(bounds) <= 0):
        raise ValueError("edges must be strictly increasing with at least two entries")
    masses, means, variances = np.empty(m), np.empty(m), np.empty(m)
    for k in range(m):
        lo, hi = bounds[k], bounds[k + 1]
        mass = _quad(pdf, lo, hi, tol)
        first = _quad(lambda x: h(x) * pdf(x), lo, hi, tol)
        second = _quad(lambda x: h(x) ** 2 * pdf(x), lo, hi, tol)
        if mass < 0:
            raise IntegrationError(f"negative mass {mass} on region {k}")
        masses[k] = mass
        means[k] = first / mass if mass > 0 else 0.0
        var = second / mass - means[k] ** 2 if mass > 0 else 0.0
        if var < -1e-8 * max(1.0, second / mass if mass > 0 else 1.0):
            raise IntegrationError(f"negative variance {var} on region {k}")
        variances[k] = max(var, 0.0)
    if abs(masses.sum() - 1.0) > 1e-6:
        logger.warning(f"oracle masses sum to {masses.sum():.8f}, not 1")
    counts = np.broadcast_to(np.asarray(samples_per_region, dtype=np.intp), (m,)).copy()
    return StratifiedOracle(masses, means, variances, counts)


def stratified_estimate(
    oracle: StratifiedOracle,
    region_samplers: Sequence[RegionSampler],
    h: Integrand,
    seed: int,
) -> float:
    """Unbiased stratified estimate sum_m abar_m * mean of h over K_m draws in region m."""
    if len(region_samplers) != oracle.region_count:
        raise ValueError("one sampler per region required")
    if np.any(oracle.samples_per_region < 1):
        raise ValueError("every region needs at least one sample (K_m >= 1)")
    total = 0.0
    for m, sampler in enumerate(region_samplers):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(m,)))
        draws = np.asarray(sampler(rng, int(oracle.samples_per_region[m])), dtype=float)
        if draws.ndim == 1:
            draws = draws[:, None]
        total += oracle.region_masses[m] * float(np.mean(evaluate_integrand(h, draws)))
    return total


def stratified_variance(oracle: StratifiedOracle) -> float:
    """Variance of the stratified estimator: sum_m abar_m^2 sigma_m^2 / K_m."""
    return float(
        np.sum(oracle.region_masses**2 * oracle.region_variances / oracle.samples_per_region)
    )


@dataclass(frozen=True)
class VarianceDecomposition:
    within: float
    between: float


def variance_decomposition(
    oracle: StratifiedOracle, total_variance: float, tol: float = 1e-6
) -> VarianceDecomposition:
    """Split a variance into within-region and between-region terms."""
    within = float(oracle.region_masses @ oracle.region_variances)
    between = float(oracle.region_masses @ (oracle.region_means - oracle.mean) ** 2)
    if total_variance < -tol or within < -tol:
        raise IntegrationError("negative variance")
    if abs(within + between - total_variance) > tol * max(1.0, abs(total_variance)):
        raise IntegrationError(
            f"within + between = {within + between} does not match total {total_variance}"
        )
    return VarianceDecomposition(within=within, between=between)
