"""Number of planets from radial-velocity data: CLAIS evidences and the model posterior."""

from typing import Any

import numpy as np
from numpy.typing import NDArray

from cmc.config import ExperimentConfig, Scale, Settings
from cmc.core import WeightedSampleSet
from cmc.errors import ConfigError
from cmc.fusion import LocalReport, model_posterior
from cmc.partition import PartitionStrategy
from cmc.samplers import ChainConfig, clais
from cmc.targets import DEFAULT_PLANETS, LogDensity, RadialVelocityModel

from .base import Experiment, ResultTable, mean_and_error, stacked
from .pool import RunPool, derive_seed


def defaults(scale: Scale, settings: Settings) -> dict[str, Any]:
    return {
        "t": 200_000 if scale == Scale.PAPER else 20_000,
        "m": 10,
        "runs": 100 if scale == Scale.PAPER else 20,
        "delta": settings.kde_delta,
        "partition_strategy": PartitionStrategy.UNIFORM_GRID,
        "options": {
            "true_planets": [1, 3],
            "max_planets": 3,
            "initial_draws": 1000,
            "step_fraction": 0.02,
        },
    }


def _initial_state(
    model: RadialVelocityModel, log_target: LogDensity, rng: np.random.Generator, draws: int
) -> NDArray[np.float64]:
    """Best of ``draws`` prior samples under the posterior."""
    candidates = model.sample_prior(rng, draws)
    return candidates[int(np.argmax(log_target(candidates)))]


def evidence_report(
    cfg: ExperimentConfig, data: NDArray[np.float64], planets: int, seed: int
) -> LocalReport:
    """CLAIS estimate of the evidence of the model with ``planets`` planets."""
    model = RadialVelocityModel(planets)
    log_target = model.log_posterior(data)
    lo, hi = model.bounds()
    step = float(cfg.option("step_fraction")) * (hi - lo)
    rng = np.random.default_rng(derive_seed(seed, 0))
    chain = ChainConfig(
        length=cfg.count("t"),
        proposal_cov=np.diag(step**2),
        initial=_initial_state(model, log_target, rng, int(cfg.option("initial_draws"))),
        seed=derive_seed(seed, 1),
    )
    assert cfg.delta is not None and cfg.partition_strategy is not None
    result = clais(log_target, chain, cfg.count("m"), cfg.delta, cfg.partition_strategy)
    s: WeightedSampleSet = result.samples
    return LocalReport.from_samples(s, node_id=planets)


def _one_run(cfg: ExperimentConfig, seed: int) -> list[float]:
    candidates = range(int(cfg.option("max_planets")) + 1)
    masses = []
    for truth in cfg.option("true_planets"):
        rng = np.random.default_rng(derive_seed(seed, truth))
        data = RadialVelocityModel(truth).simulate(DEFAULT_PLANETS[truth], rng)
        reports = [evidence_report(cfg, data, k, derive_seed(seed, truth, k)) for k in candidates]
        masses.extend(model_posterior(reports))
    return masses


def run(cfg: ExperimentConfig, pool: RunPool) -> ResultTable:
    truths = list(cfg.option("true_planets"))
    unknown = [p for p in truths if p not in DEFAULT_PLANETS]
    if unknown:
        raise ConfigError(f"no simulated system with {unknown} planet(s)")
    candidates = int(cfg.option("max_planets")) + 1
    runs = cfg.count("runs")
    results = stacked(pool.map(lambda seed: _one_run(cfg, seed), runs, cfg.seed, "exp3"))
    table = ResultTable(
        ("true_planets", "candidate", "mean_mass", "std_error", "argmax_frequency")
    )
    for i, truth in enumerate(truths):
        block = results[:, i * candidates : (i + 1) * candidates]
        winners = np.argmax(block, axis=1)
        for k in range(candidates):
            frequency = float(np.mean(winners == k))
            table.add(truth, k, *mean_and_error(block[:, k]), frequency)
    return table


EXPERIMENT = Experiment(
    id="exp3",
    title="Planet count from radial-velocity data with CLAIS evidences",
    defaults=defaults,
    run=run,
)
