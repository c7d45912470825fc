"""Bootstrap, Gaussian, improved Gaussian and compressed particle filters."""

from typing import Optional
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from ..compress import DEFAULT_DELTA, CompressedSet, compress, draw_mixture, kde_compress
from ..core import ResamplingScheme, WeightedSampleSet, resample_indices
from ..errors import NumericalError
from ..partition import Assignment, PartitionStrategy, assign, build_partition, fill_regions
from .models import LinearGaussian, StateSpaceModel

logger = logging.getLogger("cmc.filters")


@dataclass(frozen=True)
class FilterResult:
    """Posterior-mean estimates of x_1..x_T and per-step likelihood evaluation counts."""

    estimates: NDArray[np.float64]
    evaluations: NDArray[np.intp]
    particles: NDArray[np.float64]
    seed: int
    degenerate_steps: tuple[int, ...] = field(default=())

    @property
    def total_evaluations(self) -> int:
        return int(self.evaluations.sum())

    def write_csv(self, path: str | Path) -> None:
        """Trajectory table: t, x_hat_1..x_hat_d, evals (t starts at 1)."""
        header = ["t", *(f"x_hat_{i + 1}" for i in range(self.estimates.shape[1])), "evals"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for t, (estimate, evals) in enumerate(zip(self.estimates, self.evaluations), 1):
                writer.writerow([t, *(repr(float(v)) for v in estimate), int(evals)])


def _step_seed(seed: int, t: int) -> int:
    """Partition seed for step t, independent of the propagation stream."""
    return int(np.random.SeedSequence(seed, spawn_key=(t,)).generate_state(1)[0])


def _weigh(
    points: NDArray[np.float64], log_w: NDArray[np.float64], t: int, degenerate: list[int]
) -> WeightedSampleSet:
    if not np.any(np.isfinite(log_w)):
        logger.warning(f"all weights vanished at step {t}; resetting to uniform")
        degenerate.append(t)
        return WeightedSampleSet.from_weights(points)
    return WeightedSampleSet.from_log_weights(points, log_w)


def _check_finite(states: NDArray[np.float64], t: int) -> None:
    if not np.all(np.isfinite(states)):
        raise NumericalError(f"non-finite particle state at step {t}")


def _observations(observations: NDArray[np.float64]) -> NDArray[np.float64]:
    obs = np.asarray(observations, dtype=float)
    return obs[:, None] if obs.ndim == 1 else obs


def bpf(
    model: StateSpaceModel,
    observations: NDArray[np.float64],
    n: int,
    seed: int,
    scheme: ResamplingScheme = "multinomial",
) -> FilterResult:
    """Bootstrap particle filter: propagate, weight, estimate, resample."""
    if n < 2:
        raise ValueError("a particle filter needs at least two particles")
    obs = _observations(observations)
    rng = np.random.default_rng(seed)
    steps = obs.shape[0]
    estimates = np.empty((steps, model.dim_x))
    evaluations = np.zeros(steps, dtype=np.intp)
    degenerate: list[int] = []

    particles = model.initial_sampler(rng, n)
    for t in range(steps):
        particles = model.propagate(particles, rng)
        _check_finite(particles, t)
        s = _weigh(particles, model.log_likelihood(particles, obs[t]), t, degenerate)
        evaluations[t] = n
        estimates[t] = s.norm_weights @ s.points
        particles = particles[resample_indices(s.norm_weights, n, rng, scheme)]
    return FilterResult(estimates, evaluations, particles, seed, tuple(degenerate))


def _draw_kernels(
    rng: np.random.Generator,
    s: WeightedSampleSet,
    a: Assignment,
    delta: float,
    n: int,
    t: int,
) -> NDArray[np.float64]:
    """n draws from the delta-regularized kernel mixture; delta grows tenfold once on failure."""
    for attempt, scale in enumerate((1.0, 10.0)):
        c = kde_compress(s, a, "full", scale * delta)
        assert c.covariances is not None
        try:
            return draw_mixture(rng, c.particles, c.covariances, c.weights, n)
        except NumericalError:
            if attempt:
                raise
            logger.warning(f"kernel covariance not positive definite at step {t}; delta x10")
    raise AssertionError("unreachable")


def igpf(
    model: StateSpaceModel,
    observations: NDArray[np.float64],
    n: int,
    m: int,
    seed: int,
    partition_strategy: PartitionStrategy | str = PartitionStrategy.UNIFORM_GRID,
    delta: float = DEFAULT_DELTA,
) -> FilterResult:
    """Improved Gaussian particle filter: sample the next cloud from an M-kernel C-MC mixture.

    M = 1 is the Gaussian particle filter.
    """
    if not 1 <= m <= n:
        raise ValueError(f"M={m} must lie in [1, N={n}]")
    obs = _observations(observations)
    strategy = PartitionStrategy(partition_strategy)
    rng = np.random.default_rng(seed)
    steps = obs.shape[0]
    estimates = np.empty((steps, model.dim_x))
    evaluations = np.zeros(steps, dtype=np.intp)
    degenerate: list[int] = []

    particles = model.initial_sampler(rng, n)
    for t in range(steps):
        particles = model.propagate(particles, rng)
        _check_finite(particles, t)
        s = _weigh(particles, model.log_likelihood(particles, obs[t]), t, degenerate)
        evaluations[t] = n
        estimates[t] = s.norm_weights @ s.points
        if m == 1:
            a = Assignment.single(n)
        else:
            a = assign(build_partition(s, m, strategy, _step_seed(seed, t)), s)
        particles = _draw_kernels(rng, s, a, delta, n, t)
    return FilterResult(estimates, evaluations, particles, seed, tuple(degenerate))


def gpf(
    model: StateSpaceModel,
    observations: NDArray[np.float64],
    n: int,
    seed: int,
    delta: float = DEFAULT_DELTA,
) -> FilterResult:
    """Gaussian particle filter: resampling replaced by a moment-matched Gaussian draw."""
    return igpf(model, observations, n, 1, seed, delta=delta)


def cpf(
    model: StateSpaceModel,
    observations: NDArray[np.float64],
    n: int,
    m: int,
    seed: int,
    partition_strategy: PartitionStrategy | str = PartitionStrategy.UNIFORM_GRID,
    scheme: ResamplingScheme = "multinomial",
) -> FilterResult:
    """Compressed particle filter: the likelihood is evaluated on the summaries only.

    Empty regions are refilled by halving crowded ones, so each step evaluates exactly M
    likelihoods.
    """
    if not 1 <= m <= n:
        raise ValueError(f"M={m} must lie in [1, N={n}]")
    obs = _observations(observations)
    strategy = PartitionStrategy(partition_strategy)
    rng = np.random.default_rng(seed)
    steps = obs.shape[0]
    estimates = np.empty((steps, model.dim_x))
    evaluations = np.zeros(steps, dtype=np.intp)
    degenerate: list[int] = []

    particles = model.initial_sampler(rng, n)
    for t in range(steps):
        particles = model.propagate(particles, rng)
        _check_finite(particles, t)
        cloud = WeightedSampleSet.from_weights(particles)
        a = assign(build_partition(cloud, m, strategy, _step_seed(seed, t)), cloud)
        summary: CompressedSet = compress(cloud, fill_regions(cloud, a, m))
        log_lik = model.log_likelihood(summary.particles, obs[t])
        evaluations[t] = summary.size
        with np.errstate(divide="ignore"):
            log_w = np.log(summary.weights) + log_lik
        s = _weigh(summary.particles, log_w, t, degenerate)
        estimates[t] = s.norm_weights @ s.points
        particles = s.points[resample_indices(s.norm_weights, n, rng, scheme)]
    return FilterResult(estimates, evaluations, particles, seed, tuple(degenerate))


def mse(result: FilterResult | NDArray[np.float64], truth: NDArray[np.float64]) -> float:
    """Mean over time steps and state components of the squared estimation error."""
    estimates = result.estimates if isinstance(result, FilterResult) else np.asarray(result)
    truth = np.asarray(truth, dtype=float)
    if estimates.shape != truth.shape:
        raise ValueError(f"estimate shape {estimates.shape} does not match truth {truth.shape}")
    return float(np.mean((estimates - truth) ** 2))


@dataclass(frozen=True)
class KalmanResult:
    means: NDArray[np.float64]
    covariances: NDArray[np.float64]


def kalman_filter(
    model: LinearGaussian, observations: NDArray[np.float64], prior_cov: Optional[NDArray] = None
) -> KalmanResult:
    """Exact filtering moments of a linear-Gaussian model."""
    obs = _observations(observations)
    a, q, h, r = model.transition, model.process_cov, model.observation, model.noise_cov
    mean = model.x0.astype(float)
    cov = model.prior_cov if prior_cov is None else prior_cov
    means = np.empty((obs.shape[0], model.dim_x))
    covs = np.empty((obs.shape[0], model.dim_x, model.dim_x))
    for t in range(obs.shape[0]):
        mean = a @ mean
        cov = a @ cov @ a.T + q
        innovation = h @ cov @ h.T + r
        gain = np.linalg.solve(innovation, h @ cov).T
        mean = mean + gain @ (obs[t] - h @ mean)
        cov = cov - gain @ h @ cov
        cov = 0.5 * (cov + cov.T)
        means[t], covs[t] = mean, cov
    return KalmanResult(means, covs)
