"""Compressed particle filter against the bootstrap filter on the scalar |x| / log x^2 model."""

from typing import Any

import numpy as np

from cmc.config import ExperimentConfig, Scale, Settings
from cmc.filters import ScalarAbsLog, bpf, cpf, mse
from cmc.partition import PartitionStrategy

from .base import Experiment, ResultTable, mean_and_error, stacked
from .pool import RunPool, derive_seed


def defaults(scale: Scale, settings: Settings) -> dict[str, Any]:
    return {
        "n": [100, 1000],
        "t": 100,
        "runs": 5000 if scale == Scale.PAPER else 500,
        "prior_std": 1.0,
        "partition_strategy": PartitionStrategy.UNIFORM_GRID,
        "options": {"ratios": [0.01, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0]},
    }


def budgets(n: int, ratios: list[float]) -> list[int]:
    """Distinct summary counts M = round(ratio * N), clipped to [1, N]."""
    return sorted({min(n, max(1, round(r * n))) for r in ratios})


def _one_run(cfg: ExperimentConfig, seed: int) -> list[float]:
    assert cfg.prior_std is not None and cfg.partition_strategy is not None
    model = ScalarAbsLog(prior_std=cfg.prior_std)
    truth, obs = model.simulate(cfg.count("t"), np.random.default_rng(derive_seed(seed, 0)))
    row = []
    for n in cfg.counts("n"):
        filter_seed = derive_seed(seed, 1, n)
        row += [mse(bpf(model, obs, n, filter_seed), truth), 1.0]
        for m in budgets(n, cfg.option("ratios")):
            result = cpf(model, obs, n, m, filter_seed, cfg.partition_strategy)
            row += [mse(result, truth), result.total_evaluations / (n * obs.shape[0])]
    return row


def run(cfg: ExperimentConfig, pool: RunPool) -> ResultTable:
    runs = cfg.count("runs")
    results = stacked(pool.map(lambda seed: _one_run(cfg, seed), runs, cfg.seed, "exp4"))
    table = ResultTable(
        ("N", "M", "ratio", "filter", "mean_mse", "std_error", "evaluation_fraction")
    )
    col = 0
    for n in cfg.counts("n"):
        table.add(n, n, 1.0, "bpf", *mean_and_error(results[:, col]), 1.0)
        col += 2
        for m in budgets(n, cfg.option("ratios")):
            fraction = float(results[:, col + 1].mean())
            table.add(n, m, m / n, "cpf", *mean_and_error(results[:, col]), fraction)
            col += 2
    return table


EXPERIMENT = Experiment(
    id="exp4",
    title="C-PF mean square error as a function of the compression rate M/N",
    defaults=defaults,
    run=run,
)
