"""JSON/CSV wire formats for sample sets, partitions, compressed sets and node reports."""

import sys
from typing import Any, Optional, Literal, TypeVar

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self
import csv
import logging
from pathlib import Path

import numpy as np
import pydantic

from .compress import CompressedSet, CompressionMode, CovarianceMode
from .core import WeightedSampleSet
from .fusion import LocalReport
from .loss import RegionCosts
from .partition import Partition, PartitionKind, RefinementMode

logger = logging.getLogger("cmc.wire")

M = TypeVar("M", bound=pydantic.BaseModel)


def _optional() -> Any:
    return pydantic.Field(default=None, exclude_if=lambda v: v is None)


class SampleSetModel(pydantic.BaseModel):
    points: list[list[float]]
    weights: Optional[list[float]] = _optional()
    log_scale: float = 0.0

    @classmethod
    def from_domain(cls, s: WeightedSampleSet) -> Self:
        return cls(
            points=s.points.tolist(),
            weights=None if s.unnorm_weights is None else s.unnorm_weights.tolist(),
            log_scale=s.log_scale,
        )

    def to_domain(self) -> WeightedSampleSet:
        if self.weights is None:
            return WeightedSampleSet.from_weights(self.points)
        if self.log_scale == 0.0:
            return WeightedSampleSet.from_weights(self.points, self.weights)
        with np.errstate(divide="ignore"):
            log_w = np.log(np.asarray(self.weights)) + self.log_scale
        return WeightedSampleSet.from_log_weights(self.points, log_w)


def _bounds_out(values: Optional[np.ndarray]) -> Optional[list[list[Optional[float]]]]:
    if values is None:
        return None
    return [[None if np.isinf(v) else float(v) for v in row] for row in values]


def _bounds_in(rows: Optional[list[list[Optional[float]]]], fill: float) -> Optional[np.ndarray]:
    if rows is None:
        return None
    return np.array([[fill if v is None else v for v in row] for row in rows], dtype=float)


class PartitionModel(pydantic.BaseModel):
    """Partition description; unbounded box faces are written as null."""

    kind: PartitionKind
    dim: int = pydantic.Field(ge=1)
    breakpoints: list[list[float]] = []
    centroids: Optional[list[list[float]]] = _optional()
    lower: Optional[list[list[Optional[float]]]] = _optional()
    upper: Optional[list[list[Optional[float]]]] = _optional()
    warnings: list[str] = []

    @classmethod
    def from_domain(cls, p: Partition) -> Self:
        return cls(
            kind=p.kind,
            dim=p.dim,
            breakpoints=[np.asarray(b).tolist() for b in p.breakpoints],
            centroids=None if p.centroids is None else p.centroids.tolist(),
            lower=_bounds_out(p.lower),
            upper=_bounds_out(p.upper),
            warnings=list(p.warnings),
        )

    def to_domain(self) -> Partition:
        return Partition(
            kind=self.kind,
            dim=self.dim,
            breakpoints=tuple(np.asarray(b, dtype=float) for b in self.breakpoints),
            centroids=None if self.centroids is None else np.asarray(self.centroids, dtype=float),
            lower=_bounds_in(self.lower, -np.inf),
            upper=_bounds_in(self.upper, np.inf),
            warnings=tuple(self.warnings),
        )


class CompressedSetModel(pydantic.BaseModel):
    particles: list[list[float]] | list[float]
    weights: list[float]
    W: float
    mode_tag: CompressionMode
    unnorm_weights: Optional[list[float]] = _optional()
    covariances: Optional[list[list[list[float]]]] = _optional()
    covariance_mode: Optional[CovarianceMode] = _optional()
    delta: Optional[float] = _optional()
    log_scale: float = 0.0

    @classmethod
    def from_domain(cls, c: CompressedSet) -> Self:
        return cls(
            particles=c.particles.tolist(),
            weights=c.weights.tolist(),
            W=c.aggregated_weight,
            mode_tag=c.mode,
            unnorm_weights=None if c.unnorm_weights is None else c.unnorm_weights.tolist(),
            covariances=None if c.covariances is None else c.covariances.tolist(),
            covariance_mode=c.covariance_mode,
            delta=c.kernel_floor,
            log_scale=c.log_scale,
        )

    def to_domain(self) -> CompressedSet:
        return CompressedSet(
            particles=np.asarray(self.particles, dtype=float),
            weights=np.asarray(self.weights, dtype=float),
            aggregated_weight=self.W,
            mode=self.mode_tag,
            unnorm_weights=(
                None if self.unnorm_weights is None else np.asarray(self.unnorm_weights, float)
            ),
            covariances=None if self.covariances is None else np.asarray(self.covariances, float),
            covariance_mode=self.covariance_mode,
            log_scale=self.log_scale,
            kernel_floor=self.delta,
        )


class LocalReportModel(CompressedSetModel):
    """A compressed set plus what the central node needs to weigh it."""

    node_id: int = 0
    N: int = pydantic.Field(ge=1)
    Zhat: Optional[float] = _optional()
    log_Zhat: Optional[float] = _optional()

    @classmethod
    def from_report(cls, report: LocalReport) -> Self:
        if not isinstance(report.approximation, CompressedSet):
            raise ValueError("only compressed reports have a wire format")
        data = CompressedSetModel.from_domain(report.approximation).model_dump()
        data.update(
            W=report.aggregated_weight,
            node_id=report.node_id,
            N=report.sample_count,
            Zhat=report.marginal_likelihood,
            log_Zhat=report.log_marginal_likelihood,
        )
        return cls(**data)

    def to_report(self) -> LocalReport:
        return LocalReport(
            approximation=self.to_domain(),
            aggregated_weight=self.W,
            sample_count=self.N,
            node_id=self.node_id,
            marginal_likelihood=self.Zhat,
            log_marginal_likelihood=self.log_Zhat,
        )


class RegionCostsModel(pydantic.BaseModel):
    costs: list[float]
    mode: Literal["deterministic", "stochastic"]
    total: float

    @classmethod
    def from_domain(cls, rc: RegionCosts) -> Self:
        return cls(costs=rc.costs.tolist(), mode=rc.mode.value, total=rc.total)

    def to_domain(self) -> RegionCosts:
        return RegionCosts(np.asarray(self.costs, float), RefinementMode(self.mode), self.total)

    def write_csv(self, path: str | Path) -> None:
        """Audit trail: one (region_index, cost) row per region."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["region_index", "cost"])
            for m, cost in enumerate(self.costs):
                writer.writerow([m, repr(cost)])


def write_json(model: pydantic.BaseModel, path: str | Path) -> None:
    Path(path).write_text(model.model_dump_json(indent=2) + "\n")
    logger.debug(f"Wrote {type(model).__name__} to {path}")


def read_json(cls: type[M], path: str | Path) -> M:
    return cls.model_validate_json(Path(path).read_text())
