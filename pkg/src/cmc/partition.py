"""State-space partitions (grids, boxes, Voronoi cells) and the index sets J_m."""

from typing import Literal, Optional, Sequence
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray
from scipy.spatial.distance import cdist

from .core import Integrand, WeightedSampleSet, evaluate_integrand, resample_indices
from .errors import NumericalError, PartitionError

logger = logging.getLogger("cmc.partition")

PartitionKind = Literal["grid", "voronoi", "boxes"]


class PartitionStrategy(str, Enum):
    UNIFORM_GRID = "uniform_grid"
    RANDOM_GRID = "random_grid"
    KMEANS = "kmeans"
    EQUAL_COUNT = "equal_count"


class RefinementMode(str, Enum):
    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class Partition:
    """Disjoint, exhaustive partition of R^d into ``region_count`` regions.

    grid: interior breakpoints per dimension; the extreme cells are unbounded.
    voronoi: centroids; a point belongs to its nearest centroid (lowest index on ties).
    boxes: per-region lower/upper corners (may be infinite), half-open on every axis.
    """

    kind: PartitionKind
    dim: int
    breakpoints: tuple[NDArray[np.float64], ...] = ()
    centroids: Optional[NDArray[np.float64]] = None
    lower: Optional[NDArray[np.float64]] = None
    upper: Optional[NDArray[np.float64]] = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "grid":
            if len(self.breakpoints) != self.dim:
                raise ValueError("grid partitions need one breakpoint list per dimension")
            for bps in self.breakpoints:
                if bps.size > 1 and np.any(np.diff(bps) <= 0):
                    raise ValueError("grid breakpoints must be strictly increasing")
        elif self.kind == "voronoi":
            if self.centroids is None or self.centroids.shape[1] != self.dim:
                raise ValueError("voronoi partitions need (M, d) centroids")
        elif self.kind == "boxes":
            if self.lower is None or self.upper is None or self.lower.shape != self.upper.shape:
                raise ValueError("box partitions need matching lower/upper corners")

    @property
    def cells_per_dim(self) -> tuple[int, ...]:
        return tuple(bps.size + 1 for bps in self.breakpoints)

    @property
    def region_count(self) -> int:
        if self.kind == "grid":
            return int(np.prod(self.cells_per_dim))
        if self.kind == "voronoi":
            assert self.centroids is not None
            return self.centroids.shape[0]
        assert self.lower is not None
        return self.lower.shape[0]

    def boxes(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Lower/upper corners of every region of a grid or box partition."""
        if self.kind == "boxes":
            assert self.lower is not None and self.upper is not None
            return self.lower, self.upper
        if self.kind != "grid":
            raise PartitionError("only grid partitions can be expressed as boxes")
        edges = [np.concatenate(([-np.inf], bps, [np.inf])) for bps in self.breakpoints]
        cells = np.array(list(np.ndindex(*self.cells_per_dim)), dtype=int).reshape(-1, self.dim)
        lower = np.column_stack([edges[i][cells[:, i]] for i in range(self.dim)])
        upper = np.column_stack([edges[i][cells[:, i] + 1] for i in range(self.dim)])
        return lower, upper

    def locate(self, points: NDArray[np.float64]) -> NDArray[np.intp]:
        """Region index of every point."""
        if points.shape[1] != self.dim:
            raise ValueError(f"points have dimension {points.shape[1]}, partition {self.dim}")
        if self.kind == "grid":
            cell = [
                np.searchsorted(bps, points[:, i], side="right")
                for i, bps in enumerate(self.breakpoints)
            ]
            return np.ravel_multi_index(cell, self.cells_per_dim).astype(np.intp)
        if self.kind == "voronoi":
            assert self.centroids is not None
            return np.argmin(cdist(points, self.centroids, "sqeuclidean"), axis=1)
        lower, upper = self.boxes()
        inside = np.all(
            (points[:, None, :] >= lower[None, :, :]) & (points[:, None, :] < upper[None, :, :]),
            axis=2,
        )
        labels = np.argmax(inside, axis=1)
        if not np.all(inside[np.arange(points.shape[0]), labels]):
            raise PartitionError("box partition does not cover every point")
        return labels.astype(np.intp)


@dataclass(frozen=True)
class Assignment:
    """Index sets J_m of the samples falling in each region (empty regions kept)."""

    labels: NDArray[np.intp]
    index_sets: tuple[NDArray[np.intp], ...]

    @classmethod
    def from_labels(cls, labels: NDArray[np.intp], region_count: int) -> "Assignment":
        order = np.argsort(labels, kind="stable")
        counts = np.bincount(labels, minlength=region_count)
        return cls(labels=labels, index_sets=tuple(np.split(order, np.cumsum(counts)[:-1])))

    @classmethod
    def single(cls, n: int) -> "Assignment":
        """All n samples in one region."""
        return cls.from_labels(np.zeros(n, dtype=np.intp), 1)

    @property
    def region_count(self) -> int:
        return len(self.index_sets)

    @property
    def counts(self) -> NDArray[np.intp]:
        return np.array([idx.size for idx in self.index_sets], dtype=np.intp)


def assign(p: Partition, s: WeightedSampleSet) -> Assignment:
    """Map every sample to exactly one region."""
    return Assignment.from_labels(p.locate(s.points), p.region_count)


def _grid_ranges(
    s: WeightedSampleSet, cells_per_dim: Sequence[int]
) -> tuple[list[tuple[float, float, int]], tuple[str, ...]]:
    if len(cells_per_dim) != s.dim:
        raise PartitionError(f"need {s.dim} cell counts, got {len(cells_per_dim)}")
    if any(c < 1 for c in cells_per_dim):
        raise PartitionError("cell counts must be positive")
    ranges = []
    warnings = []
    lo, hi = s.points.min(axis=0), s.points.max(axis=0)
    for i, cells in enumerate(cells_per_dim):
        if lo[i] == hi[i] and cells > 1:
            msg = f"dimension {i + 1} has zero sample range; collapsed to 1 cell"
            logger.warning(msg)
            warnings.append(msg)
            cells = 1
        ranges.append((float(lo[i]), float(hi[i]), int(cells)))
    return ranges, tuple(warnings)


def build_uniform_grid(s: WeightedSampleSet, cells_per_dim: Sequence[int]) -> Partition:
    """P2: equally spaced interior breakpoints over the sample bounding box."""
    ranges, warnings = _grid_ranges(s, cells_per_dim)
    breakpoints = tuple(
        lo + (hi - lo) * np.arange(1, cells) / cells for lo, hi, cells in ranges
    )
    return Partition(kind="grid", dim=s.dim, breakpoints=breakpoints, warnings=warnings)


def build_random_grid(
    s: WeightedSampleSet, cells_per_dim: Sequence[int], rng_seed: int
) -> Partition:
    """P1: interior breakpoints drawn uniformly inside the sample range, then sorted."""
    ranges, warnings = _grid_ranges(s, cells_per_dim)
    rng = np.random.default_rng(rng_seed)
    breakpoints = []
    for i, (lo, hi, cells) in enumerate(ranges):
        bps = np.unique(rng.uniform(lo, hi, cells - 1))
        if bps.size < cells - 1:
            msg = f"dimension {i + 1}: duplicate random breakpoints merged"
            logger.warning(msg)
            warnings = warnings + (msg,)
        breakpoints.append(bps)
    return Partition(kind="grid", dim=s.dim, breakpoints=tuple(breakpoints), warnings=warnings)


def grid_shape_for_budget(s: WeightedSampleSet, m: int) -> tuple[int, ...]:
    """Split a budget of m cells over the dimensions, widest dimensions first."""
    factors = []
    rest, f = m, 2
    while rest > 1:
        while rest % f == 0:
            factors.append(f)
            rest //= f
        f += 1
    spread = np.ptp(s.points, axis=0)
    cells = [1] * s.dim
    for factor in sorted(factors, reverse=True):
        i = int(np.argmax(spread / np.asarray(cells)))
        cells[i] *= factor
    return tuple(cells)


def _kmeans_sse(points: NDArray[np.float64], centroids: NDArray[np.float64]) -> float:
    return float(cdist(points, centroids, "sqeuclidean").min(axis=1).sum())


def build_voronoi_kmeans(
    s: WeightedSampleSet, m: int, rng_seed: int, max_iters: int = 100
) -> Partition:
    """P3: Lloyd's k-means; weighted sets are clustered after multinomial resampling."""
    rng = np.random.default_rng(rng_seed)
    points = s.points
    if s.is_weighted:
        resampled = points[resample_indices(s.norm_weights, s.size, rng)]
        if np.unique(resampled, axis=0).shape[0] >= m:
            points = resampled
        else:
            logger.debug("resampled cloud has fewer than M distinct points; using raw points")
    distinct = np.unique(points, axis=0)
    if m < 1 or m > distinct.shape[0]:
        raise PartitionError(f"M={m} exceeds the {distinct.shape[0]} distinct points")

    centroids = distinct[rng.choice(distinct.shape[0], size=m, replace=False)].copy()
    labels = np.full(points.shape[0], -1, dtype=np.intp)
    for iteration in range(max_iters):
        dist = cdist(points, centroids, "sqeuclidean")
        new_labels = np.argmin(dist, axis=1)
        counts = np.bincount(new_labels, minlength=m)
        for k in np.flatnonzero(counts == 0):
            far = int(np.argmax(dist[np.arange(points.shape[0]), new_labels]))
            logger.debug(f"k-means cluster {k} empty at iteration {iteration}; reseeded")
            centroids[k] = points[far]
            new_labels[far] = k
            dist[far] = 0.0
            counts = np.bincount(new_labels, minlength=m)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for k in range(m):
            members = labels == k
            if members.any():
                centroids[k] = points[members].mean(axis=0)

    warnings: tuple[str, ...] = ()
    if np.unique(centroids, axis=0).shape[0] < m:
        msg = "k-means produced coincident centroids"
        logger.warning(msg)
        warnings = (msg,)
    return Partition(kind="voronoi", dim=s.dim, centroids=centroids, warnings=warnings)


def build_equal_count_partition(s: WeightedSampleSet, m: int) -> Partition:
    """Quantile breakpoints so each cell holds floor(N/M) or ceil(N/M) samples (d = 1)."""
    if s.dim != 1:
        raise PartitionError("equal-count partition implemented for d=1 only")
    if s.is_weighted:
        raise PartitionError("equal-count partition requires unweighted samples")
    n = s.size
    if m < 1 or m > n:
        raise PartitionError(f"M={m} must lie in [1, {n}]")
    x = np.sort(s.points[:, 0])
    base, extra = divmod(n, m)
    sizes = np.full(m, base)
    sizes[:extra] += 1
    ends = np.cumsum(sizes)[:-1]
    if np.any(x[ends - 1] == x[ends]):
        raise PartitionError("tied samples straddle a quantile boundary")
    breakpoints = 0.5 * (x[ends - 1] + x[ends])
    return Partition(kind="grid", dim=1, breakpoints=(breakpoints,))


def build_partition(
    s: WeightedSampleSet,
    m: int,
    strategy: PartitionStrategy | str = PartitionStrategy.UNIFORM_GRID,
    seed: int = 0,
) -> Partition:
    """Build a partition with (at most) m regions using the named strategy."""
    match PartitionStrategy(strategy):
        case PartitionStrategy.UNIFORM_GRID:
            return build_uniform_grid(s, grid_shape_for_budget(s, m))
        case PartitionStrategy.RANDOM_GRID:
            return build_random_grid(s, grid_shape_for_budget(s, m), seed)
        case PartitionStrategy.KMEANS:
            return build_voronoi_kmeans(s, m, seed)
        case PartitionStrategy.EQUAL_COUNT:
            return build_equal_count_partition(s, m)


def fill_regions(s: WeightedSampleSet, a: Assignment, m: int) -> Assignment:
    """Drop empty regions, then halve the most populated ones until exactly m are non-empty.

    A region is halved by sample order along its widest axis, so ties never block a split.
    """
    if not 1 <= m <= s.size:
        raise PartitionError(f"M={m} must lie in [1, N={s.size}]")
    live = [idx for idx in a.index_sets if idx.size]
    if len(live) > m:
        raise PartitionError(f"{len(live)} non-empty regions exceed the budget M={m}")
    while len(live) < m:
        k = max(range(len(live)), key=lambda i: live[i].size)
        members = live[k]
        axis = int(np.argmax(np.ptp(s.points[members], axis=0)))
        order = members[np.argsort(s.points[members, axis], kind="stable")]
        half = order.size // 2
        live[k] = np.sort(order[:half])
        live.append(np.sort(order[half:]))
    if len(live) < a.region_count:
        logger.debug(f"filled {a.region_count} regions to {m} non-empty ones")
    labels = np.empty(s.size, dtype=np.intp)
    for region, idx in enumerate(live):
        labels[idx] = region
    return Assignment.from_labels(labels, m)


def _region_costs(
    s: WeightedSampleSet, labels: NDArray[np.intp], m: int, h: Integrand, mode: RefinementMode
) -> NDArray[np.float64]:
    # local import: loss depends on compress, which depends on this module
    from .loss import region_costs_deterministic, region_costs_stochastic

    a = Assignment.from_labels(labels, m)
    if mode == RefinementMode.DETERMINISTIC:
        return region_costs_deterministic(s, a, h).costs
    return region_costs_stochastic(s, a, h).costs


def _split_box(
    points: NDArray[np.float64], weights: NDArray[np.float64]
) -> Optional[tuple[int, float]]:
    """Axis of widest spread and the weighted-median split value, or None."""
    spread = np.ptp(points, axis=0)
    if points.shape[0] < 2 or not np.any(spread > 0):
        return None
    axis = int(np.argmax(spread))
    order = np.argsort(points[:, axis], kind="stable")
    values = points[order, axis]
    cumulative = np.cumsum(weights[order])
    distinct, first = np.unique(values, return_index=True)
    mass_below = cumulative[np.append(first[1:], values.size) - 1]
    j = int(np.searchsorted(mass_below, 0.5 * weights.sum(), side="left"))
    j = min(max(j, 0), distinct.size - 2)
    return axis, 0.5 * (distinct[j] + distinct[j + 1])


def adaptive_refine(
    s: WeightedSampleSet,
    h: Integrand,
    initial: Partition,
    *,
    max_regions: Optional[int] = None,
    loss_threshold: Optional[float] = None,
    mode: RefinementMode | str = RefinementMode.STOCHASTIC,
) -> Partition:
    """Split the region with the largest cost until a region budget or loss threshold is met.

    ``max_regions`` is an inclusive cap: splitting stops once the partition holds that many
    regions, and an initial partition already at or above it is returned unsplit.
    Deterministic costs are signed; regions are ranked by their magnitude.
    """
    if max_regions is None and loss_threshold is None:
        raise PartitionError("adaptive refinement needs max_regions or loss_threshold")
    mode = RefinementMode(mode)
    evaluate_integrand(h, s.points)
    lower, upper = initial.boxes()
    lower, upper = lower.copy(), upper.copy()
    labels = initial.locate(s.points)

    def loss_of(costs: NDArray[np.float64]) -> float:
        if mode == RefinementMode.DETERMINISTIC:
            return float(costs.sum() ** 2)
        return float(costs.sum())

    costs = _region_costs(s, labels, lower.shape[0], h, mode)
    loss = loss_of(costs)
    warnings = list(initial.warnings)
    while True:
        if max_regions is not None and lower.shape[0] >= max_regions:
            break
        if loss_threshold is not None and loss < loss_threshold:
            break
        split = None
        for m in np.argsort(-np.abs(costs), kind="stable"):
            members = labels == m
            if abs(costs[m]) == 0.0:
                break
            split = _split_box(s.points[members], s.norm_weights[members])
            if split is not None:
                break
        if split is None:
            msg = "no splittable region left; refinement stopped early"
            logger.info(msg)
            warnings.append(msg)
            break
        axis, value = split
        child_lower, child_upper = lower[m].copy(), upper[m].copy()
        child_lower[axis] = value
        upper[m, axis] = value
        lower = np.vstack([lower, child_lower])
        upper = np.vstack([upper, child_upper])
        moved = (labels == m) & (s.points[:, axis] >= value)
        labels = labels.copy()
        labels[moved] = lower.shape[0] - 1

        costs = _region_costs(s, labels, lower.shape[0], h, mode)
        new_loss = loss_of(costs)
        if mode == RefinementMode.STOCHASTIC and new_loss > loss + 1e-12 * max(1.0, loss):
            raise NumericalError(f"stochastic loss increased on split: {loss} -> {new_loss}")
        logger.debug(f"split region {m} on axis {axis} at {value:.6g}: loss {loss} -> {new_loss}")
        loss = new_loss

    return Partition(kind="boxes", dim=s.dim, lower=lower, upper=upper, warnings=tuple(warnings))
