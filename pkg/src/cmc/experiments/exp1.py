"""Compression of plain Monte Carlo samples: loss in the first five moments."""

from typing import Any

import numpy as np

from cmc.compress import CompressedSet, CompressionMode, bootstrap_compress, compress
from cmc.config import ExperimentConfig, Scale, Settings
from cmc.core import MomentFamily, WeightedSampleSet
from cmc.errors import ConfigError
from cmc.loss import loss_family
from cmc.partition import assign, build_random_grid, build_uniform_grid
from cmc.targets import SCALAR_TARGETS

from .base import Experiment, ResultTable, mean_and_error, stacked
from .pool import RunPool, derive_seed

GRIDS = {"p1": build_random_grid, "p2": build_uniform_grid}
MODES = (CompressionMode.STOCHASTIC, CompressionMode.DETERMINISTIC)


def defaults(scale: Scale, settings: Settings) -> dict[str, Any]:
    return {
        "n": 100_000 if scale == Scale.PAPER else 10_000,
        "m": [4, 8, 16, 32],
        "runs": 500 if scale == Scale.PAPER else 100,
        "options": {"targets": ["gamma", "mixture"], "moments": 5},
    }


def methods(cfg: ExperimentConfig) -> list[str]:
    modes = MODES if cfg.compression_mode is None else (cfg.compression_mode,)
    if not set(modes) <= set(MODES):
        raise ConfigError(f"exp1 has no {modes[0].value} variant")
    return ["bs"] + [f"{grid}_{mode.value}" for grid in GRIDS for mode in modes]


def _compressed(s: WeightedSampleSet, m: int, method: str, seed: int) -> CompressedSet:
    if method == "bs":
        return bootstrap_compress(s, m, seed)
    grid, mode = method.split("_", 1)
    build = GRIDS[grid]
    partition = build(s, (m,), seed) if grid == "p1" else build(s, (m,))
    return compress(s, assign(partition, s), mode, seed=seed)


def _one_run(cfg: ExperimentConfig, seed: int) -> list[float]:
    n = cfg.count("n")
    fam = MomentFamily.powers(int(cfg.option("moments", 5)))
    losses = []
    for k, name in enumerate(cfg.option("targets")):
        target = SCALAR_TARGETS[name]()
        rng = np.random.default_rng(derive_seed(seed, k))
        s = WeightedSampleSet.from_weights(target.sample(rng, n))
        for m in cfg.counts("m"):
            for method in methods(cfg):
                c = _compressed(s, m, method, derive_seed(seed, k, m))
                losses.append(loss_family(s, c, fam))
    return losses


def run(cfg: ExperimentConfig, pool: RunPool) -> ResultTable:
    runs = cfg.count("runs")
    unknown = set(cfg.option("targets")) - set(SCALAR_TARGETS)
    if unknown:
        raise ConfigError(f"unknown exp1 target(s): {sorted(unknown)}")
    methods(cfg)
    results = stacked(pool.map(lambda seed: _one_run(cfg, seed), runs, cfg.seed, "exp1"))
    table = ResultTable(("target", "M", "method", "mean_loss", "std_error"))
    col = 0
    for name in cfg.option("targets"):
        for m in cfg.counts("m"):
            for method in methods(cfg):
                table.add(name, m, method, *mean_and_error(results[:, col]))
                col += 1
    return table


EXPERIMENT = Experiment(
    id="exp1",
    title="Loss in the first moments of compressed Gamma and Gaussian-mixture samples",
    defaults=defaults,
    run=run,
)
