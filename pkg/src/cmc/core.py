"""Weighted sample sets and plain / importance-sampling Monte Carlo estimators."""

from typing import Callable, Iterable, Literal, Optional, Sequence
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DegenerateWeightsError,
    MissingWeightsError,
    NonFiniteIntegrandError,
)

logger = logging.getLogger("cmc.core")

Integrand = Callable[[NDArray[np.float64]], NDArray[np.float64]]
"""Vectorized map R^d -> R: takes an (n, d) array, returns n values."""

ResamplingScheme = Literal["multinomial", "systematic"]


def normalize_weights(w: ArrayLike) -> NDArray[np.float64]:
    """Normalize nonnegative weights so they sum to one."""
    arr = np.asarray(w, dtype=float)
    if arr.size == 0 or not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DegenerateWeightsError("weights must be finite and nonnegative")
    total = arr.sum()
    if total <= 0:
        raise DegenerateWeightsError("all weights are zero")
    return arr / total


def _as_points(points: ArrayLike) -> NDArray[np.float64]:
    arr = np.array(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"points must be a non-empty (N, d) array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class WeightedSampleSet:
    """N points in R^d with normalized weights and optional unnormalized ones.

    ``log_scale`` records a max-shift applied to log-weights: the true unnormalized
    weights are ``unnorm_weights * exp(log_scale)``.
    """

    points: NDArray[np.float64]
    norm_weights: NDArray[np.float64]
    unnorm_weights: Optional[NDArray[np.float64]] = None
    log_scale: float = 0.0

    def __post_init__(self) -> None:
        n = self.points.shape[0]
        if self.norm_weights.shape != (n,):
            raise ValueError("norm_weights must hold one entry per point")
        if self.unnorm_weights is not None and self.unnorm_weights.shape != (n,):
            raise ValueError("unnorm_weights must hold one entry per point")
        if np.any(self.norm_weights < 0) or abs(self.norm_weights.sum() - 1.0) > 1e-12:
            raise DegenerateWeightsError("normalized weights must be nonnegative and sum to 1")

    @classmethod
    def from_weights(
        cls, points: ArrayLike, weights: Optional[ArrayLike] = None
    ) -> "WeightedSampleSet":
        """Build a set from points and (optional) unnormalized weights."""
        pts = _as_points(points)
        n = pts.shape[0]
        if weights is None:
            return cls(points=pts, norm_weights=np.full(n, 1.0 / n))
        w = np.asarray(weights, dtype=float).copy()
        return cls(points=pts, norm_weights=normalize_weights(w), unnorm_weights=w)

    @classmethod
    def from_log_weights(cls, points: ArrayLike, log_weights: ArrayLike) -> "WeightedSampleSet":
        """Build a weighted set from log-weights, exp-shifting by their maximum."""
        log_w = np.asarray(log_weights, dtype=float)
        if np.any(np.isnan(log_w)) or np.any(log_w == np.inf):
            raise DegenerateWeightsError("log-weights must not be NaN or +inf")
        shift = float(np.max(log_w))
        if not np.isfinite(shift):
            raise DegenerateWeightsError("all log-weights are -inf")
        w = np.exp(log_w - shift)
        pts = _as_points(points)
        return cls(
            points=pts, norm_weights=normalize_weights(w), unnorm_weights=w, log_scale=shift
        )

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def is_weighted(self) -> bool:
        return self.unnorm_weights is not None

    def total_weight(self) -> float:
        """Aggregated weight W: sum of unnormalized weights, or N when unweighted."""
        if self.unnorm_weights is None:
            return float(self.size)
        return float(self.unnorm_weights.sum() * np.exp(self.log_scale))


def evaluate_integrand(h: Integrand, points: NDArray[np.float64]) -> NDArray[np.float64]:
    """Evaluate a vectorized integrand and reject non-finite values."""
    values = np.asarray(h(points), dtype=float).reshape(points.shape[0])
    if not np.all(np.isfinite(values)):
        raise NonFiniteIntegrandError(int(np.count_nonzero(~np.isfinite(values))))
    return values


def mc_estimate(s: WeightedSampleSet, h: Integrand) -> float:
    """Self-normalized estimate sum_i wbar_i h(x_i)."""
    return float(s.norm_weights @ evaluate_integrand(h, s.points))


def marginal_likelihood(s: WeightedSampleSet) -> float:
    """Unbiased IS estimate of Z: mean of the unnormalized weights."""
    if s.unnorm_weights is None:
        raise MissingWeightsError("Z unavailable for unweighted samples")
    return float(np.mean(s.unnorm_weights) * np.exp(s.log_scale))


def log_marginal_likelihood(s: WeightedSampleSet) -> float:
    if s.unnorm_weights is None:
        raise MissingWeightsError("Z unavailable for unweighted samples")
    mean_w = float(np.mean(s.unnorm_weights))
    return s.log_scale + (np.log(mean_w) if mean_w > 0 else -np.inf)


def weighted_mean(points: NDArray[np.float64], weights: NDArray[np.float64]) -> NDArray:
    return weights @ points


def weighted_covariance(
    points: NDArray[np.float64],
    weights: NDArray[np.float64],
    mean: Optional[NDArray[np.float64]] = None,
) -> NDArray[np.float64]:
    """Weighted second central moment; weights assumed normalized."""
    centred = points - (weighted_mean(points, weights) if mean is None else mean)
    return (centred * weights[:, None]).T @ centred


def resample_indices(
    weights: NDArray[np.float64],
    n: int,
    rng: np.random.Generator,
    scheme: ResamplingScheme = "multinomial",
) -> NDArray[np.intp]:
    """Draw n ancestor indices according to normalized weights."""
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    if scheme == "systematic":
        u = (rng.random() + np.arange(n)) / n
    else:
        u = rng.random(n)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(weights) - 1)


@dataclass(frozen=True)
class MomentFamily:
    """Functions h_1..h_R with loss weights xi_r^2."""

    functions: tuple[Integrand, ...]
    loss_weights: NDArray[np.float64] = field(default_factory=lambda: np.ones(0))

    def __post_init__(self) -> None:
        if len(self.functions) < 1:
            raise ValueError("a moment family needs at least one function")
        if self.loss_weights.size == 0:
            object.__setattr__(self, "loss_weights", np.ones(len(self.functions)))
        if self.loss_weights.shape != (len(self.functions),) or np.any(self.loss_weights <= 0):
            raise ValueError("loss_weights must be positive, one per function")

    @classmethod
    def of(
        cls, functions: Iterable[Integrand], loss_weights: Optional[Sequence[float]] = None
    ) -> "MomentFamily":
        funcs = tuple(functions)
        weights = np.ones(len(funcs)) if loss_weights is None else np.asarray(loss_weights, float)
        return cls(functions=funcs, loss_weights=weights)

    @classmethod
    def powers(cls, r: int, axis: int = 0) -> "MomentFamily":
        """Raw moments x^1..x^R of one coordinate, unit loss weights."""
        return cls.of(_power(axis, k) for k in range(1, r + 1))

    @property
    def size(self) -> int:
        return len(self.functions)

    def with_weights(self, loss_weights: ArrayLike) -> "MomentFamily":
        return MomentFamily(self.functions, np.asarray(loss_weights, dtype=float))


def _power(axis: int, k: int) -> Integrand:
    def h(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return x[:, axis] ** k

    h.__name__ = f"x{axis + 1}^{k}"
    return h


def read_csv(path: str | Path) -> WeightedSampleSet:
    """Read a sample set: columns x_1..x_d and an optional unnormalized weight column w."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        coords = sorted(
            (f for f in fields if f.startswith("x_")), key=lambda f: int(f.split("_")[1])
        )
        if not coords:
            raise ValueError(f"{path}: CSV must have columns x_1..x_d")
        rows = list(reader)
    points = np.array([[float(row[c]) for c in coords] for row in rows], dtype=float)
    weights = np.array([float(row["w"]) for row in rows]) if "w" in fields else None
    logger.debug(f"Read {len(rows)} samples of dimension {len(coords)} from {path}")
    return WeightedSampleSet.from_weights(points, weights)


def write_csv(s: WeightedSampleSet, path: str | Path) -> None:
    """Write a sample set in the CSV layout read by read_csv."""
    header = [f"x_{i + 1}" for i in range(s.dim)]
    weights = None
    if s.unnorm_weights is not None:
        header.append("w")
        weights = s.unnorm_weights * np.exp(s.log_scale)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for n, point in enumerate(s.points):
            row = [repr(float(v)) for v in point]
            if weights is not None:
                row.append(repr(float(weights[n])))
            writer.writerow(row)
