"""Random-walk Metropolis, population Monte Carlo, LAIS temporal-mixture weights and CLAIS."""

from typing import Iterator, Literal
import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from .compress import CompressedSet, gaussian_logpdf, kde_compress
from .core import WeightedSampleSet, log_marginal_likelihood, resample_indices
from .errors import ConfigError, DegenerateWeightsError
from .partition import PartitionStrategy, assign, build_partition
from .targets import LogDensity

logger = logging.getLogger("cmc.samplers")

CompressionSource = Literal["means", "samples"]


@dataclass(frozen=True)
class ChainConfig:
    """Random-walk Metropolis settings; ``tempering`` scales the log target seen by the chain."""

    length: int
    proposal_cov: NDArray[np.float64]
    initial: NDArray[np.float64]
    seed: int
    tempering: float = 1.0

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ConfigError("chain length must be at least 1")
        if self.tempering <= 0:
            raise ConfigError("tempering exponent must be positive")
        cov = np.atleast_2d(np.asarray(self.proposal_cov, dtype=float))
        init = np.atleast_1d(np.asarray(self.initial, dtype=float))
        if cov.shape != (init.size, init.size) or not np.allclose(cov, cov.T):
            raise ConfigError("proposal covariance must be a symmetric d x d matrix")
        object.__setattr__(self, "proposal_cov", cov)
        object.__setattr__(self, "initial", init)
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ConfigError("proposal covariance is not positive definite") from exc

    @property
    def proposal_chol(self) -> NDArray[np.float64]:
        return np.linalg.cholesky(self.proposal_cov)

    @property
    def dim(self) -> int:
        return self.initial.size


@dataclass(frozen=True)
class Chain:
    states: NDArray[np.float64]
    log_target: NDArray[np.float64]
    accepted: NDArray[np.bool_]

    @property
    def acceptance_rate(self) -> float:
        if self.accepted.size < 2:
            return 1.0
        return float(self.accepted[1:].mean())


def mh_random_walk(log_target: LogDensity, cfg: ChainConfig) -> Chain:
    """Symmetric Gaussian random-walk Metropolis chain of cfg.length states."""
    rng = np.random.default_rng(cfg.seed)
    chol = cfg.proposal_chol
    states = np.zeros((cfg.length, cfg.dim))
    loglike = np.zeros(cfg.length)
    accepted = np.zeros(cfg.length, dtype=bool)

    start_like = float(log_target(cfg.initial[None, :])[0])
    if not np.isfinite(start_like):
        raise ConfigError(f"starting point {cfg.initial} gives log target {start_like}")
    states[0], loglike[0], accepted[0] = cfg.initial, start_like, True

    for i in range(1, cfg.length):
        old_state = states[i - 1]
        old_like = loglike[i - 1]

        new_state = old_state + chol @ rng.standard_normal(cfg.dim)
        new_like = float(log_target(new_state[None, :])[0])

        # nan or -inf marks a point outside the support
        ratio = cfg.tempering * (new_like - old_like) if np.isfinite(new_like) else -np.inf
        if rng.random() < np.exp(min(0.0, ratio)):
            accepted[i] = True
            states[i], loglike[i] = new_state, new_like
        else:
            states[i], loglike[i] = old_state, old_like

    chain = Chain(states=states, log_target=loglike, accepted=accepted)
    logger.debug(f"MH chain of {cfg.length} states, acceptance {chain.acceptance_rate:.3f}")
    return chain


def _isotropic_logpdf(
    x: NDArray[np.float64], means: NDArray[np.float64], sigma: float
) -> NDArray[np.float64]:
    d = x.shape[1]
    sq = np.sum((x - means) ** 2, axis=1)
    return -0.5 * (d * np.log(2 * np.pi * sigma**2) + sq / sigma**2)


def pmc_iterations(
    log_target: LogDensity,
    n: int,
    iterations: int,
    init_proposals: ArrayLike,
    seed: int,
    proposal_std: float = 2.0,
) -> Iterator[WeightedSampleSet]:
    """Standard PMC: one Gaussian draw per location, weights pi/q, locations resampled each round.

    Yields the weighted set of every iteration.
    """
    if n < 1 or iterations < 1:
        raise ConfigError("PMC needs at least one sample and one iteration")
    rng = np.random.default_rng(seed)
    init = np.atleast_2d(np.asarray(init_proposals, dtype=float))
    means = np.resize(init, (n, init.shape[1]))
    for it in range(iterations):
        x = means + proposal_std * rng.standard_normal(means.shape)
        log_w = log_target(x) - _isotropic_logpdf(x, means, proposal_std)
        if not np.any(np.isfinite(log_w)):
            raise DegenerateWeightsError(f"weight degeneracy at PMC iteration {it}")
        current = WeightedSampleSet.from_log_weights(x, log_w)
        yield current
        means = x[resample_indices(current.norm_weights, n, rng)]


def pmc(
    log_target: LogDensity,
    n: int,
    iterations: int,
    init_proposals: ArrayLike,
    seed: int,
    proposal_std: float = 2.0,
) -> WeightedSampleSet:
    """Weighted samples of the final PMC iteration."""
    last = None
    for last in pmc_iterations(log_target, n, iterations, init_proposals, seed, proposal_std):
        pass
    assert last is not None
    return last


def _lais_log_weights(
    samples: NDArray[np.float64],
    means: NDArray[np.float64],
    cov: NDArray[np.float64],
    log_target: LogDensity,
) -> NDArray[np.float64]:
    t = means.shape[0]
    kernels = np.broadcast_to(cov, (t, *cov.shape))
    log_q = gaussian_logpdf(samples, means, kernels)
    log_den = logsumexp(log_q, axis=1) - np.log(t)
    return log_target(samples) - log_den


def lais_weights(
    samples: ArrayLike, means: ArrayLike, cov: ArrayLike, log_target: LogDensity
) -> NDArray[np.float64]:
    """w_t = pi(x_t) / [(1/T) sum_k q(x_t | mu_k, C)]; costs T^2 kernel evaluations."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    mu = np.atleast_2d(np.asarray(means, dtype=float))
    if x.shape != mu.shape:
        raise ValueError("one sample per mean required")
    c = np.atleast_2d(np.asarray(cov, dtype=float))
    return np.exp(_lais_log_weights(x, mu, c, log_target))


@dataclass(frozen=True)
class CLAISResult:
    samples: WeightedSampleSet
    z: float
    log_z: float
    mixture: CompressedSet
    chain: Chain
    target_evaluations: int
    kernel_evaluations: int
    underflows: int


def clais(
    log_target: LogDensity,
    cfg: ChainConfig,
    m: int,
    delta: float = 0.1,
    partition_strategy: PartitionStrategy | str = PartitionStrategy.UNIFORM_GRID,
    source: CompressionSource = "means",
) -> CLAISResult:
    """Compressed LAIS: MH means, one proposal draw per mean, weights pi(x_t) / mixture(x_t).

    With ``source="means"`` the chain states are compressed and every kernel is widened by the
    proposal covariance, approximating the temporal mixture over the means. With
    ``source="samples"`` the drawn samples are compressed directly.
    """
    if not 1 <= m < cfg.length:
        raise ConfigError(f"M={m} must satisfy 1 <= M < T={cfg.length}")
    chain = mh_random_walk(log_target, cfg)
    means = chain.states

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    samples = means + rng.standard_normal(means.shape) @ cfg.proposal_chol.T

    source_set = WeightedSampleSet.from_weights(means if source == "means" else samples)
    partition = build_partition(source_set, m, PartitionStrategy(partition_strategy), cfg.seed)
    mixture = kde_compress(source_set, assign(partition, source_set), "full", delta)
    if source == "means":
        mixture = CompressedSet(
            particles=mixture.particles,
            weights=mixture.weights,
            aggregated_weight=mixture.aggregated_weight,
            mode=mixture.mode,
            covariances=mixture.covariances + cfg.proposal_cov,
            covariance_mode="full",
            kernel_floor=mixture.kernel_floor,
        )

    assert mixture.covariances is not None
    log_kernels = gaussian_logpdf(samples, mixture.particles, mixture.covariances)
    with np.errstate(divide="ignore"):
        log_den = logsumexp(log_kernels + np.log(mixture.weights), axis=1)
    log_num = np.asarray(log_target(samples), dtype=float)
    underflow = ~np.isfinite(log_den)
    if np.any(underflow):
        logger.warning(f"mixture density underflowed at {int(underflow.sum())} sample(s)")
    with np.errstate(invalid="ignore"):
        log_w = np.where(underflow | ~np.isfinite(log_num), -np.inf, log_num - log_den)
    weighted = WeightedSampleSet.from_log_weights(samples, log_w)
    log_z = log_marginal_likelihood(weighted)
    return CLAISResult(
        samples=weighted,
        z=float(np.exp(log_z)),
        log_z=log_z,
        mixture=mixture,
        chain=chain,
        target_evaluations=log_num.size,
        kernel_evaluations=log_kernels.size,
        underflows=int(underflow.sum()),
    )
