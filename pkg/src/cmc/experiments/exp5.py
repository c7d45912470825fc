"""Bearings-only tracking: Gaussian particle filter against its compressed-mixture version."""

from typing import Any

import numpy as np

from cmc.config import ExperimentConfig, Scale, Settings
from cmc.filters import BearingsOnlyTracking, gpf, igpf, mse
from cmc.partition import PartitionStrategy

from .base import Experiment, ResultTable, mean_and_error, stacked
from .pool import RunPool, derive_seed


def defaults(scale: Scale, settings: Settings) -> dict[str, Any]:
    return {
        "n": 1000,
        "m": [5, 10, 20, 30],
        "t": 15,
        "runs": 100_000 if scale == Scale.PAPER else 1000,
        "delta": settings.kde_delta,
        "prior_std": 1.0,
        "partition_strategy": PartitionStrategy.UNIFORM_GRID,
    }


def _one_run(cfg: ExperimentConfig, seed: int) -> list[float]:
    assert cfg.delta is not None and cfg.prior_std is not None
    assert cfg.partition_strategy is not None
    model = BearingsOnlyTracking(prior_std=cfg.prior_std)
    truth, obs = model.simulate(cfg.count("t"), np.random.default_rng(derive_seed(seed, 0)))
    n, filter_seed = cfg.count("n"), derive_seed(seed, 1)
    row = [mse(gpf(model, obs, n, filter_seed, cfg.delta), truth)]
    for m in cfg.counts("m"):
        result = igpf(model, obs, n, m, filter_seed, cfg.partition_strategy, cfg.delta)
        row.append(mse(result, truth))
    return row


def run(cfg: ExperimentConfig, pool: RunPool) -> ResultTable:
    runs = cfg.count("runs")
    results = stacked(pool.map(lambda seed: _one_run(cfg, seed), runs, cfg.seed, "exp5"))
    table = ResultTable(("filter", "M", "mean_mse", "std_error"))
    table.add("gpf", 1, *mean_and_error(results[:, 0]))
    for k, m in enumerate(cfg.counts("m"), start=1):
        table.add("igpf", m, *mean_and_error(results[:, k]))
    return table


EXPERIMENT = Experiment(
    id="exp5",
    title="Bearings-only tracking: GPF versus I-GPF with M kernels",
    defaults=defaults,
    run=run,
)
