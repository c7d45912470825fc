"""Distributed tracking of a coordinated-turn target with L processors and K mixed sensors."""

from typing import Any

import numpy as np

from cmc.config import ExperimentConfig, Scale, Settings
from cmc.filters import CoordinatedTurn, cmc_dpf, gaussian_dpf, mse
from cmc.partition import PartitionStrategy

from .base import Experiment, ResultTable, mean_and_error, stacked
from .pool import RunPool, derive_seed

METHODS = ("gaussian", "cmc")


def defaults(scale: Scale, settings: Settings) -> dict[str, Any]:
    return {
        "n": 1000 if scale == Scale.PAPER else 500,
        "m": 4,
        "t": 10,
        "l": [4, 8],
        "k": [8, 16, 40],
        "runs": 10_000 if scale == Scale.PAPER else 1000,
        "delta": settings.kde_delta,
        "prior_std": 1.0,
        "partition_strategy": PartitionStrategy.UNIFORM_GRID,
        "options": {"enumeration_cap": settings.enumeration_cap, "region": 3.0},
    }


def _one_run(cfg: ExperimentConfig, seed: int) -> list[float]:
    assert cfg.delta is not None and cfg.prior_std is not None
    assert cfg.partition_strategy is not None
    n, m, steps = cfg.count("n"), cfg.count("m"), cfg.count("t")
    cap = int(cfg.option("enumeration_cap"))
    region = float(cfg.option("region"))
    row = []
    for k in cfg.counts("k"):
        rng = np.random.default_rng(derive_seed(seed, k))
        model = CoordinatedTurn.with_sensor_field(
            k, rng, region, prior_std=cfg.prior_std
        )
        truth, obs = model.simulate(steps, rng)
        for nodes in cfg.counts("nodes"):
            filter_seed = derive_seed(seed, k, nodes)
            baseline = gaussian_dpf(model, obs, n, nodes, filter_seed, cfg.delta, region)
            compressed = cmc_dpf(
                model, obs, n, nodes, m, filter_seed, cfg.delta, cfg.partition_strategy, cap, region
            )
            row += [mse(baseline, truth), mse(compressed, truth)]
    return row


def run(cfg: ExperimentConfig, pool: RunPool) -> ResultTable:
    runs = cfg.count("runs")
    results = stacked(pool.map(lambda seed: _one_run(cfg, seed), runs, cfg.seed, "exp6"))
    table = ResultTable(("L", "K", "M", "method", "mean_mse", "std_error"))
    m = cfg.count("m")
    rows = []
    col = 0
    for k in cfg.counts("k"):
        for nodes in cfg.counts("nodes"):
            for method in METHODS:
                rows.append((nodes, k, 1 if method == "gaussian" else m, method, col))
                col += 1
    for nodes, k, components, method, c in sorted(rows, key=lambda r: (r[0], r[1], r[4])):
        table.add(nodes, k, components, method, *mean_and_error(results[:, c]))
    return table


EXPERIMENT = Experiment(
    id="exp6",
    title="Distributed particle filtering: single Gaussian versus C-MC mixtures per node",
    defaults=defaults,
    run=run,
)
