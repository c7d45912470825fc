"""Distributed particle filtering: local nodes report compressed mixtures to a central node."""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.spatial.distance import cdist

from ..compress import DEFAULT_DELTA, kde_compress, kde_sample
from ..core import WeightedSampleSet, weighted_covariance
from ..errors import NumericalError
from ..fusion import DEFAULT_ENUMERATION_CAP, LocalReport, fuse_product_of_mixtures
from ..partition import Assignment, PartitionStrategy, assign, build_partition
from .models import CoordinatedTurn
from .particle import FilterResult, _check_finite, _observations, _step_seed

logger = logging.getLogger("cmc.filters")


def processor_grid(nodes: int, region: float = 3.0) -> NDArray[np.float64]:
    """Processor positions at the cell centres of a near-square grid over the region."""
    rows = int(np.floor(np.sqrt(nodes)))
    while nodes % rows:
        rows -= 1
    cols = nodes // rows
    xs = -region + (2 * np.arange(cols) + 1) * region / cols
    ys = -region + (2 * np.arange(rows) + 1) * region / rows
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def assign_sensors(sensors: NDArray[np.float64], processors: NDArray[np.float64]) -> list:
    """Sensor indices handled by each processor (nearest processor, lowest index on ties)."""
    nearest = np.argmin(cdist(sensors, processors), axis=1)
    return [np.flatnonzero(nearest == k) for k in range(processors.shape[0])]


@dataclass(frozen=True)
class DistributedSetup:
    processors: NDArray[np.float64]
    sensor_sets: list

    @classmethod
    def for_model(
        cls, model: CoordinatedTurn, nodes: int, region: float = 3.0
    ) -> "DistributedSetup":
        processors = processor_grid(nodes, region)
        return cls(processors, assign_sensors(model.sensors, processors))

    @property
    def node_count(self) -> int:
        return self.processors.shape[0]


def _predictive_gaussian(
    particles: NDArray[np.float64], delta: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    weights = np.full(particles.shape[0], 1.0 / particles.shape[0])
    mean = weights @ particles
    cov = weighted_covariance(particles, weights, mean) + delta * np.eye(particles.shape[1])
    return mean, 0.5 * (cov + cov.T)


def cmc_dpf(
    model: CoordinatedTurn,
    observations: NDArray[np.float64],
    n: int,
    nodes: int,
    m: int,
    seed: int,
    delta: float = DEFAULT_DELTA,
    partition_strategy: PartitionStrategy | str = PartitionStrategy.UNIFORM_GRID,
    cap: int = DEFAULT_ENUMERATION_CAP,
    region: float = 3.0,
) -> FilterResult:
    """Distributed filter whose nodes send M-kernel C-MC mixtures of their partial posteriors.

    Every node targets the shared predictive density tempered by 1/L times the likelihood of
    its own sensors; the central node multiplies the node mixtures and samples the next cloud.
    """
    obs = _observations(observations)
    strategy = PartitionStrategy(partition_strategy)
    setup = DistributedSetup.for_model(model, nodes, region)
    rng = np.random.default_rng(seed)
    steps = obs.shape[0]
    estimates = np.empty((steps, model.dim_x))
    evaluations = np.zeros(steps, dtype=np.intp)
    degenerate: list[int] = []

    particles = model.initial_sampler(rng, n)
    for t in range(steps):
        particles = model.propagate(particles, rng)
        _check_finite(particles, t)
        mean, cov = _predictive_gaussian(particles, delta)
        tempered_chol = np.linalg.cholesky(setup.node_count * cov)

        reports = []
        for node, sensors in enumerate(setup.sensor_sets):
            local = mean + rng.standard_normal((n, model.dim_x)) @ tempered_chol.T
            log_w = model.log_likelihood(local, obs[t], subset=sensors)
            evaluations[t] += n if sensors.size else 0
            if np.any(np.isfinite(log_w)):
                s = WeightedSampleSet.from_log_weights(local, log_w)
            else:
                degenerate.append(t)
                s = WeightedSampleSet.from_weights(local)
            if m == 1:
                a = Assignment.single(n)
            else:
                a = assign(build_partition(s, m, strategy, _step_seed(seed, t * nodes + node)), s)
            reports.append(LocalReport.from_compressed(kde_compress(s, a, "full", delta), n, node))

        try:
            fused = fuse_product_of_mixtures(reports, cap).mixture
        except NumericalError as exc:
            # fall back to the predictive fit when every product component is rejected
            logger.warning(f"fusion failed at step {t} ({exc}); keeping the predictive cloud")
            degenerate.append(t)
            estimates[t] = mean
            continue
        estimates[t] = fused.weights @ fused.particles
        particles = kde_sample(fused, n, rng).points
    return FilterResult(estimates, evaluations, particles, seed, tuple(sorted(set(degenerate))))


def gaussian_dpf(
    model: CoordinatedTurn,
    observations: NDArray[np.float64],
    n: int,
    nodes: int,
    seed: int,
    delta: float = DEFAULT_DELTA,
    region: float = 3.0,
) -> FilterResult:
    """Baseline: every node reports a single moment-matched Gaussian."""
    return cmc_dpf(model, observations, n, nodes, 1, seed, delta, region=region)
