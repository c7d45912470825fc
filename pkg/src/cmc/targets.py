"""Built-in targets: scalar test densities, range-only sensor network, radial-velocity model."""

from typing import Callable
import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats

logger = logging.getLogger("cmc.targets")

LogDensity = Callable[[NDArray[np.float64]], NDArray[np.float64]]
"""Vectorized log-density: (n, d) points to n values, -inf outside the support."""


@dataclass(frozen=True)
class ScalarTarget:
    """A 1-D density with an exact sampler."""

    name: str
    dist: Callable[[np.random.Generator, int], NDArray[np.float64]]
    density: Callable[[NDArray[np.float64]], NDArray[np.float64]]
    mean: float
    variance: float

    def sample(self, rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        return self.dist(rng, n).reshape(n, 1)

    def pdf(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.density(np.asarray(x, dtype=float))


def gamma_target(shape: float = 4.0, scale: float = 0.5) -> ScalarTarget:
    frozen = stats.gamma(a=shape, scale=scale)
    return ScalarTarget(
        name="gamma",
        dist=lambda rng, n: frozen.rvs(size=n, random_state=rng),
        density=frozen.pdf,
        mean=shape * scale,
        variance=shape * scale**2,
    )


def gaussian_mixture_target(
    means: tuple[float, ...] = (-2.0, 4.0),
    variances: tuple[float, ...] = (1.0, 0.25),
    weights: tuple[float, ...] = (0.5, 0.5),
) -> ScalarTarget:
    mu, var, w = np.array(means), np.array(variances), np.array(weights)
    sd = np.sqrt(var)

    def draw(rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        component = rng.choice(w.size, size=n, p=w)
        return mu[component] + sd[component] * rng.standard_normal(n)

    def density(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.sum(w * stats.norm.pdf(np.asarray(x)[..., None], loc=mu, scale=sd), axis=-1)

    mean = float(w @ mu)
    return ScalarTarget(
        name="mixture",
        dist=draw,
        density=density,
        mean=mean,
        variance=float(w @ (var + mu**2) - mean**2),
    )


SCALAR_TARGETS: dict[str, Callable[[], ScalarTarget]] = {
    "gamma": gamma_target,
    "mixture": gaussian_mixture_target,
}


@dataclass(frozen=True)
class SensorNetwork:
    """Target located in the plane from noisy log-range readings of fixed sensors."""

    sensors: NDArray[np.float64] = field(
        default_factory=lambda: np.array([[3.0, -8.0], [10.0, 0.0], [0.0, 10.0]])
    )
    noise_std: float = 6.0
    true_position: NDArray[np.float64] = field(default_factory=lambda: np.array([2.5, 2.5]))
    prior_box: tuple[float, float] = (-30.0, 30.0)

    def mean_reading(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """20 log ||x - h_j|| for every point (rows) and sensor (columns)."""
        dist = np.linalg.norm(x[:, None, :] - self.sensors[None, :, :], axis=-1)
        with np.errstate(divide="ignore"):
            return 20.0 * np.log(dist)

    def simulate(self, rng: np.random.Generator) -> NDArray[np.float64]:
        clean = self.mean_reading(self.true_position[None, :])[0]
        return clean + self.noise_std * rng.standard_normal(clean.size)

    def log_posterior(self, observations: NDArray[np.float64]) -> LogDensity:
        """Unnormalized log posterior under a uniform prior on the box (prior density included)."""
        lo, hi = self.prior_box
        log_prior = -2.0 * np.log(hi - lo)

        def log_target(x: NDArray[np.float64]) -> NDArray[np.float64]:
            pts = np.atleast_2d(x)
            with np.errstate(invalid="ignore"):
                resid = observations[None, :] - self.mean_reading(pts)
                value = -0.5 * np.sum(resid**2, axis=1) / self.noise_std**2 + log_prior
            inside = np.all((pts >= lo) & (pts <= hi), axis=1)
            value = np.where(inside & np.isfinite(value), value, -np.inf)
            return value

        return log_target


@dataclass(frozen=True)
class RadialVelocityModel:
    """Star velocity V plus one sinusoidal term per planet, unit Gaussian noise.

    Parameters are ordered [V, K_1, P_1, e_1, w_1, K_2, ...], so d = 1 + 5 * n_planets.
    """

    n_planets: int
    times: NDArray[np.float64] = field(default_factory=lambda: np.linspace(0.0, 365.0, 50))
    velocity_range: tuple[float, float] = (-20.0, 20.0)
    amplitude_range: tuple[float, float] = (0.0, 20.0)
    period_range: tuple[float, float] = (0.0, 365.0)
    eccentricity_range: tuple[float, float] = (0.0, 1.0)
    periastron_range: tuple[float, float] = (-np.pi, np.pi)
    noise_std: float = 1.0

    @property
    def dim(self) -> int:
        return 1 + 5 * self.n_planets

    def bounds(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        planet = [
            self.amplitude_range,
            self.period_range,
            self.eccentricity_range,
            self.periastron_range,
        ]
        ranges = np.array([self.velocity_range] + planet * self.n_planets, dtype=float)
        return ranges[:, 0], ranges[:, 1]

    def signal(self, params: NDArray[np.float64]) -> NDArray[np.float64]:
        """Noise-free velocities, shape (n, len(times)), for parameter rows of shape (n, d)."""
        p = np.atleast_2d(params)
        out = np.repeat(p[:, :1], self.times.size, axis=1)
        for i in range(self.n_planets):
            k, period, ecc, omega = (p[:, 1 + 5 * i + j][:, None] for j in range(4))
            with np.errstate(divide="ignore", invalid="ignore"):
                phase = 2.0 * np.pi / period * self.times[None, :] + omega
            out = out + k * (np.cos(phase) + ecc * np.cos(omega))
        return out

    def simulate(self, params: ArrayLike, rng: np.random.Generator) -> NDArray[np.float64]:
        clean = self.signal(np.asarray(params, dtype=float))[0]
        return clean + self.noise_std * rng.standard_normal(clean.size)

    def sample_prior(self, rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        lo, hi = self.bounds()
        return lo + (hi - lo) * rng.random((n, self.dim))

    def log_prior(self, params: NDArray[np.float64]) -> NDArray[np.float64]:
        lo, hi = self.bounds()
        p = np.atleast_2d(params)
        inside = np.all((p >= lo) & (p <= hi), axis=1)
        return np.where(inside, -np.sum(np.log(hi - lo)), -np.inf)

    def log_posterior(self, observations: NDArray[np.float64]) -> LogDensity:
        """Log likelihood plus normalized log prior, so the evidence is the marginal likelihood."""
        n_obs = observations.size
        log_norm = -0.5 * n_obs * np.log(2.0 * np.pi * self.noise_std**2)

        def log_target(x: NDArray[np.float64]) -> NDArray[np.float64]:
            p = np.atleast_2d(x)
            prior = self.log_prior(p)
            value = np.full(p.shape[0], -np.inf)
            inside = np.isfinite(prior)
            if np.any(inside):
                resid = observations[None, :] - self.signal(p[inside])
                loglike = log_norm - 0.5 * np.sum(resid**2, axis=1) / self.noise_std**2
                value[inside] = np.where(np.isfinite(loglike), loglike + prior[inside], -np.inf)
            return value

        return log_target


DEFAULT_PLANETS: dict[int, tuple[float, ...]] = {
    0: (2.0,),
    1: (2.0, 10.0, 120.0, 0.3, 1.0),
    3: (2.0, 10.0, 40.0, 0.2, 0.5, 7.0, 110.0, 0.4, -1.0, 5.0, 250.0, 0.1, 2.0),
}
"""Parameter vectors used to simulate data sets with 0, 1 and 3 planets."""
