"""Compressed Monte Carlo: summary particles, KDE mixtures, LS weights and bootstrap baseline."""

from typing import Literal, Optional
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import cho_factor, solve_triangular
from scipy.special import logsumexp

from .core import (
    Integrand,
    MomentFamily,
    WeightedSampleSet,
    evaluate_integrand,
    mc_estimate,
    resample_indices,
)
from .errors import (
    DegenerateWeightsError,
    EmptyRegionError,
    MissingWeightsError,
    NonFiniteIntegrandError,
    NumericalError,
    handle_numerical_errors,
)
from .partition import Assignment

logger = logging.getLogger("cmc.compress")

CovarianceMode = Literal["full", "shared_diagonal"]
DEFAULT_DELTA = 0.1


class CompressionMode(str, Enum):
    STOCHASTIC = "stochastic"
    DETERMINISTIC = "deterministic"
    H_SPECIFIC = "h_specific"
    LS = "ls"
    BOOTSTRAP = "bootstrap"
    FUSED = "fused"


@dataclass(frozen=True)
class CompressedSet:
    """M' summary particles with weights summing to one.

    In h_specific mode particles are scalar values of h (shape (M',)) and admit no
    spatial operation; otherwise particles have shape (M', d).
    """

    particles: NDArray[np.float64]
    weights: NDArray[np.float64]
    aggregated_weight: float
    mode: CompressionMode
    unnorm_weights: Optional[NDArray[np.float64]] = None
    covariances: Optional[NDArray[np.float64]] = None
    covariance_mode: Optional[CovarianceMode] = None
    log_scale: float = 0.0
    integrand: Optional[Integrand] = None
    kernel_floor: Optional[float] = None

    def __post_init__(self) -> None:
        m = self.weights.shape[0]
        if self.particles.shape[0] != m:
            raise ValueError("one weight per summary particle required")
        if self.mode != CompressionMode.LS:
            if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
                raise DegenerateWeightsError("summary weights must be nonnegative and sum to 1")
        if self.covariances is not None:
            if self.mode == CompressionMode.H_SPECIFIC:
                raise ValueError("h-specific particles carry no kernels")
            d = self.particles.shape[1]
            if self.covariances.shape != (m, d, d):
                raise ValueError(f"covariances must have shape ({m}, {d}, {d})")
            if not np.allclose(self.covariances, np.swapaxes(self.covariances, 1, 2)):
                raise ValueError("covariances must be symmetric")
            smallest = float(np.linalg.eigvalsh(self.covariances)[:, 0].min(initial=np.inf))
            if smallest <= 0:
                raise ValueError("covariances must be positive definite")
            if self.kernel_floor is not None and smallest < self.kernel_floor * (1 - 1e-9):
                raise ValueError(
                    f"kernel eigenvalue {smallest:.6g} below the floor delta={self.kernel_floor}"
                )

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return 1 if self.particles.ndim == 1 else self.particles.shape[1]

    @property
    def is_spatial(self) -> bool:
        return self.mode != CompressionMode.H_SPECIFIC

    def payload_scalars(self) -> int:
        return payload_count(
            self.size, self.dim, self.covariance_mode, weighted=self.unnorm_weights is not None
        )


def payload_count(
    m: int, d: int, covariance_mode: Optional[CovarianceMode] = None, weighted: bool = False
) -> int:
    """Scalars needed to transmit M summaries in R^d, plus one for W when weighted."""
    match covariance_mode:
        case "full":
            count = m * (d * d + 3 * d + 2) // 2
        case "shared_diagonal":
            count = m * (2 * d + 1)
        case _:
            count = m * (d + 1)
    return count + (1 if weighted else 0)


def _check_assignment(s: WeightedSampleSet, a: Assignment) -> None:
    if a.labels.shape[0] != s.size:
        raise ValueError(f"assignment covers {a.labels.shape[0]} samples, set has {s.size}")


def cmc_weights(s: WeightedSampleSet, a: Assignment) -> NDArray[np.float64]:
    """Summary weights a_m: the mass of normalized weights in each region."""
    _check_assignment(s, a)
    if not s.is_weighted:
        return a.counts / s.size
    return np.bincount(a.labels, weights=s.norm_weights, minlength=a.region_count)


def within_region_weights(s: WeightedSampleSet, a: Assignment, m: int) -> NDArray[np.float64]:
    """Weights of the samples of region m renormalized inside the region."""
    idx = a.index_sets[m]
    if idx.size == 0:
        raise EmptyRegionError(m)
    if not s.is_weighted:
        return np.full(idx.size, 1.0 / idx.size)
    mass = s.norm_weights[idx].sum()
    if mass <= 0:
        raise EmptyRegionError(m)
    return s.norm_weights[idx] / mass


def _live_regions(s: WeightedSampleSet, a: Assignment) -> tuple[NDArray[np.intp], NDArray]:
    masses = cmc_weights(s, a)
    live = np.flatnonzero(masses > 0)
    dropped = a.region_count - live.size
    if dropped:
        logger.debug(f"dropping {dropped} empty region(s) of {a.region_count}")
    return live, masses


def _finish(
    s: WeightedSampleSet,
    a: Assignment,
    live: NDArray[np.intp],
    masses: NDArray,
    particles: NDArray[np.float64],
    mode: CompressionMode,
    **extra,
) -> CompressedSet:
    weights = masses[live]
    weights = weights / weights.sum()
    unnorm = None
    if s.unnorm_weights is not None:
        unnorm = np.bincount(a.labels, weights=s.unnorm_weights, minlength=a.region_count)[live]
    return CompressedSet(
        particles=particles,
        weights=weights,
        aggregated_weight=s.total_weight(),
        mode=mode,
        unnorm_weights=unnorm,
        log_scale=s.log_scale,
        **extra,
    )


def compress(
    s: WeightedSampleSet,
    a: Assignment,
    mode: CompressionMode | str = CompressionMode.DETERMINISTIC,
    *,
    seed: Optional[int] = None,
    h: Optional[Integrand] = None,
) -> CompressedSet:
    """Summarize each non-empty region by one particle carrying the region's mass."""
    mode = CompressionMode(mode)
    _check_assignment(s, a)
    live, masses = _live_regions(s, a)

    match mode:
        case CompressionMode.DETERMINISTIC:
            particles = np.array(
                [within_region_weights(s, a, m) @ s.points[a.index_sets[m]] for m in live]
            )
            return _finish(s, a, live, masses, particles, mode)
        case CompressionMode.STOCHASTIC:
            if seed is None:
                raise ValueError("stochastic compression needs a seed")
            chosen = []
            for m in live:
                rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(m),)))
                cdf = np.cumsum(within_region_weights(s, a, m))
                pick = np.searchsorted(cdf, rng.random() * cdf[-1], side="right")
                chosen.append(a.index_sets[m][min(pick, cdf.size - 1)])
            return _finish(s, a, live, masses, s.points[np.array(chosen)], mode)
        case CompressionMode.H_SPECIFIC:
            if h is None:
                raise ValueError("h-specific compression needs the integrand h")
            values = evaluate_integrand(h, s.points)
            particles = np.array(
                [within_region_weights(s, a, m) @ values[a.index_sets[m]] for m in live]
            )
            return _finish(s, a, live, masses, particles, mode, integrand=h)
        case _:
            raise ValueError(f"compress() does not produce {mode.value} sets")


def cmc_estimate(c: CompressedSet, g: Integrand) -> float:
    """C-MC estimate sum_m a_m g(s_m)."""
    if c.mode == CompressionMode.H_SPECIFIC:
        values = np.asarray(g(c.particles), dtype=float).reshape(c.size)
        if not np.all(np.isfinite(values)):
            raise NonFiniteIntegrandError(int(np.count_nonzero(~np.isfinite(values))))
    else:
        values = evaluate_integrand(g, c.particles)
    return float(c.weights @ values)


def reconstruct_Z(c: CompressedSet, n: int) -> float:
    """IS marginal-likelihood estimate recovered from the unnormalized summary weights."""
    if c.unnorm_weights is None:
        raise MissingWeightsError("unweighted source")
    return float(c.unnorm_weights.sum() / n * np.exp(c.log_scale))


def kde_compress(
    s: WeightedSampleSet,
    a: Assignment,
    covariance_mode: CovarianceMode = "full",
    delta: float = DEFAULT_DELTA,
) -> CompressedSet:
    """Deterministic summaries with Gaussian kernels regularized by delta * I."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    live, masses = _live_regions(s, a)
    d = s.dim
    eye = np.eye(d)
    particles = np.empty((live.size, d))
    covariances = np.empty((live.size, d, d))
    if covariance_mode == "shared_diagonal":
        mean = s.norm_weights @ s.points
        shared = np.diag(s.norm_weights @ (s.points - mean) ** 2) + delta * eye
    for k, m in enumerate(live):
        w = within_region_weights(s, a, m)
        x = s.points[a.index_sets[m]]
        particles[k] = w @ x
        if covariance_mode == "full":
            centred = x - particles[k]
            cov = (centred * w[:, None]).T @ centred
            covariances[k] = 0.5 * (cov + cov.T) + delta * eye
        else:
            covariances[k] = shared
    return _finish(
        s,
        a,
        live,
        masses,
        particles,
        CompressionMode.DETERMINISTIC,
        covariances=covariances,
        covariance_mode=covariance_mode,
        kernel_floor=delta,
    )


def _component_cholesky(covariances: NDArray[np.float64]) -> NDArray[np.float64]:
    try:
        return np.linalg.cholesky(covariances)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("kernel covariance is not positive definite") from exc


def draw_mixture(
    rng: np.random.Generator,
    means: NDArray[np.float64],
    covariances: NDArray[np.float64],
    weights: NDArray[np.float64],
    n: int,
) -> NDArray[np.float64]:
    """n draws from a Gaussian mixture; a single component consumes no selection uniforms."""
    chol = _component_cholesky(covariances)
    if weights.size == 1:
        component = np.zeros(n, dtype=np.intp)
    else:
        cdf = np.cumsum(weights)
        component = np.minimum(
            np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right"), weights.size - 1
        )
    z = rng.standard_normal((n, means.shape[1]))
    return means[component] + np.einsum("nij,nj->ni", chol[component], z)


def kde_sample(c: CompressedSet, n: int, seed: int | np.random.Generator) -> WeightedSampleSet:
    """n unweighted draws from the Gaussian mixture sum_m a_m N(s_m, Sigma_m)."""
    if c.covariances is None:
        raise ValueError("kde_sample needs a compressed set with covariances")
    if np.any(c.weights < 0):
        raise DegenerateWeightsError("mixture weights must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return WeightedSampleSet.from_weights(
        draw_mixture(rng, c.particles, c.covariances, c.weights, n)
    )


@handle_numerical_errors()
def gaussian_logpdf(
    x: NDArray[np.float64], means: NDArray[np.float64], covariances: NDArray[np.float64]
) -> NDArray[np.float64]:
    """log N(x_i | mu_k, Sigma_k) for every point i and component k, shape (n, K)."""
    n, d = x.shape
    out = np.empty((n, means.shape[0]))
    for k in range(means.shape[0]):
        chol, _ = cho_factor(covariances[k], lower=True)
        z = solve_triangular(chol, (x - means[k]).T, lower=True)
        log_det = 2.0 * np.log(np.diag(chol)).sum()
        out[:, k] = -0.5 * (d * np.log(2 * np.pi) + log_det + (z * z).sum(axis=0))
    return out


def mixture_logpdf(c: CompressedSet, x: ArrayLike) -> NDArray[np.float64]:
    """Log-density of the compressed Gaussian mixture at each row of x."""
    if c.covariances is None:
        raise ValueError("mixture_logpdf needs a compressed set with covariances")
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        log_w = np.log(c.weights)
    return logsumexp(gaussian_logpdf(pts, c.particles, c.covariances) + log_w, axis=1)


@dataclass(frozen=True)
class LeastSquaresWeights:
    weights: NDArray[np.float64]
    rank: int
    rank_deficient: bool
    residual_norm: float


def ls_weights(
    particles: ArrayLike, s: WeightedSampleSet, fam: MomentFamily
) -> LeastSquaresWeights:
    """Weights matching 1 and the sample estimates of h_1..h_R in the least-squares sense.

    Solved with an SVD (minimum-norm on rank deficiency); weights may be negative and are
    not renormalized.
    """
    pts = np.atleast_2d(np.asarray(particles, dtype=float))
    if pts.shape[1] != s.dim:
        pts = pts.reshape(-1, s.dim)
    rows = [np.ones(pts.shape[0])]
    for h in fam.functions:
        rows.append(np.asarray(h(pts), dtype=float).reshape(pts.shape[0]))
    matrix = np.vstack(rows)
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteIntegrandError(int(np.count_nonzero(~np.isfinite(matrix))))
    target = np.array([1.0] + [mc_estimate(s, h) for h in fam.functions])
    solution, _, rank, _ = np.linalg.lstsq(matrix, target, rcond=None)
    deficient = bool(rank < pts.shape[0])
    if deficient:
        logger.warning(f"LS system rank {rank} < {pts.shape[0]} unknowns; minimum-norm weights")
    residual = float(np.linalg.norm(matrix @ solution - target))
    return LeastSquaresWeights(solution, int(rank), deficient, residual)


def ls_compress(particles: ArrayLike, s: WeightedSampleSet, fam: MomentFamily) -> CompressedSet:
    pts = np.atleast_2d(np.asarray(particles, dtype=float)).reshape(-1, s.dim)
    solution = ls_weights(pts, s, fam)
    return CompressedSet(
        particles=pts,
        weights=solution.weights,
        aggregated_weight=s.total_weight(),
        mode=CompressionMode.LS,
    )


def bootstrap_compress(s: WeightedSampleSet, m: int, seed: int) -> CompressedSet:
    """Baseline: M multinomial resamples with uniform weights plus the aggregated weight W."""
    if m < 1 or m > s.size:
        raise ValueError(f"M={m} must lie in [1, {s.size}]")
    rng = np.random.default_rng(seed)
    idx = resample_indices(s.norm_weights, m, rng)
    return CompressedSet(
        particles=s.points[idx],
        weights=np.full(m, 1.0 / m),
        aggregated_weight=s.total_weight(),
        mode=CompressionMode.BOOTSTRAP,
    )
