"""Localization in a range-only sensor network with L parallel PMC nodes.

Every node compresses its weighted samples before sending them to the central node; the
pooled approximation is compared with the pool of the uncompressed samples on nine scalar
statistics (mean, covariance, skewness and kurtosis).
"""

from typing import Any, NamedTuple

import numpy as np
from numpy.typing import NDArray

from cmc.compress import CompressedSet, CompressionMode, bootstrap_compress, compress
from cmc.config import ExperimentConfig, Scale, Settings
from cmc.errors import ConfigError
from cmc.fusion import LocalReport, fuse_parallel
from cmc.partition import PartitionStrategy, assign, build_partition
from cmc.samplers import pmc
from cmc.targets import LogDensity, SensorNetwork

from .base import Experiment, ResultTable, mean_and_error, stacked
from .pool import RunPool, derive_seed

METHODS = ("cmc", "bs")


class SweepPoint(NamedTuple):
    sweep: str
    nodes: int
    n_local: int
    m_local: int


def defaults(scale: Scale, settings: Settings) -> dict[str, Any]:
    return {
        "n": [100, 500, 1000, 2000, 5000],
        "m": [1, 2, 5, 10, 20, 50],
        "l": [2, 5, 10, 20],
        "runs": 200 if scale == Scale.PAPER else 20,
        "partition_strategy": PartitionStrategy.KMEANS,
        "compression_mode": CompressionMode.DETERMINISTIC,
        "options": {
            "sweeps": ["m_local", "eta", "n_local", "nodes"],
            "base_n": 1000,
            "base_m": 10,
            "base_l": 10,
            "eta": 100,
            "pmc_iterations": 20,
            "proposal_std": 2.0,
        },
    }


def sweep_points(cfg: ExperimentConfig) -> list[SweepPoint]:
    """Vary M_l; vary M_l at fixed N_l / M_l; vary N_l; vary L."""
    base_n, base_m, base_l = (int(cfg.option(k)) for k in ("base_n", "base_m", "base_l"))
    eta = int(cfg.option("eta"))
    grids = {
        "m_local": [SweepPoint("m_local", base_l, base_n, m) for m in cfg.counts("m")],
        "eta": [SweepPoint("eta", base_l, eta * m, m) for m in cfg.counts("m")],
        "n_local": [SweepPoint("n_local", base_l, n, base_m) for n in cfg.counts("n")],
        "nodes": [SweepPoint("nodes", nodes, base_n, base_m) for nodes in cfg.counts("nodes")],
    }
    points = []
    for name in cfg.option("sweeps"):
        if name not in grids:
            raise ConfigError(f"unknown exp2 sweep '{name}'")
        points.extend(p for p in grids[name] if p.m_local <= p.n_local)
    return points


def moment_summary(points: NDArray[np.float64], weights: NDArray[np.float64]) -> NDArray:
    """Mean (2), covariance (3), skewness (2) and kurtosis (2) of a weighted 2-D cloud."""
    mean = weights @ points
    centred = points - mean
    cov = (centred * weights[:, None]).T @ centred
    var = np.diag(cov)
    with np.errstate(divide="ignore", invalid="ignore"):
        skew = (weights @ centred**3) / var**1.5
        kurt = (weights @ centred**4) / var**2
    skew = np.where(var > 0, skew, 0.0)
    kurt = np.where(var > 0, kurt, 0.0)
    return np.concatenate([mean, [cov[0, 0], cov[0, 1], cov[1, 1]], skew, kurt])


def _node_reports(
    cfg: ExperimentConfig, log_target: LogDensity, point: SweepPoint, seed: int
) -> tuple[list[LocalReport], dict[str, list[LocalReport]]]:
    network = SensorNetwork()
    lo, hi = network.prior_box
    full: list[LocalReport] = []
    compressed: dict[str, list[LocalReport]] = {method: [] for method in METHODS}
    for node in range(point.nodes):
        node_seed = derive_seed(seed, node)
        rng = np.random.default_rng(node_seed)
        init = rng.uniform(lo, hi, size=(point.n_local, 2))
        s = pmc(
            log_target,
            point.n_local,
            int(cfg.option("pmc_iterations")),
            init,
            node_seed,
            float(cfg.option("proposal_std")),
        )
        full.append(LocalReport.from_samples(s, node))
        partition = build_partition(s, point.m_local, cfg.partition_strategy, node_seed)
        c: CompressedSet = compress(
            s, assign(partition, s), cfg.compression_mode, seed=node_seed
        )
        compressed["cmc"].append(LocalReport.from_compressed(c, s.size, node))
        bs = bootstrap_compress(s, point.m_local, node_seed)
        compressed["bs"].append(LocalReport.from_compressed(bs, s.size, node))
    return full, compressed


def _one_run(cfg: ExperimentConfig, points: list[SweepPoint], seed: int) -> list[float]:
    network = SensorNetwork()
    observations = network.simulate(np.random.default_rng(derive_seed(seed, 0)))
    log_target = network.log_posterior(observations)
    losses = []
    for k, point in enumerate(points):
        full, compressed = _node_reports(cfg, log_target, point, derive_seed(seed, 1, k))
        pooled = fuse_parallel(full)
        reference = moment_summary(pooled.particles, pooled.weights)
        for method in METHODS:
            fused = fuse_parallel(compressed[method])
            diff = moment_summary(fused.particles, fused.weights) - reference
            losses.append(float(diff @ diff))
    return losses


def run(cfg: ExperimentConfig, pool: RunPool) -> ResultTable:
    if cfg.compression_mode not in (CompressionMode.DETERMINISTIC, CompressionMode.STOCHASTIC):
        raise ConfigError("exp2 compresses with the stochastic or deterministic scheme")
    points = sweep_points(cfg)
    runs = cfg.count("runs")
    results = stacked(pool.map(lambda seed: _one_run(cfg, points, seed), runs, cfg.seed, "exp2"))
    table = ResultTable(
        ("sweep", "L", "N_local", "M_local", "method", "mean_loss", "std_error")
    )
    col = 0
    for point in points:
        for method in METHODS:
            table.add(*point, method, *mean_and_error(results[:, col]))
            col += 1
    return table


EXPERIMENT = Experiment(
    id="exp2",
    title="Sensor-network localization: parallel PMC nodes, C-MC versus bootstrap",
    defaults=defaults,
    run=run,
)
