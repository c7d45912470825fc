"""State-space models. Every method is vectorized over particles: states have shape (n, d)."""

from typing import Optional
import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger("cmc.filters")


def wrap_angle(x: NDArray[np.float64]) -> NDArray[np.float64]:
    return (x + np.pi) % (2.0 * np.pi) - np.pi


def _gaussian_loglik(resid: NDArray[np.float64], std: ArrayLike) -> NDArray[np.float64]:
    """Sum over measurement components of log N(resid | 0, std^2); non-finite maps to -inf."""
    sd = np.asarray(std, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        terms = -0.5 * (resid / sd) ** 2 - np.log(sd) - 0.5 * np.log(2.0 * np.pi)
        value = np.sum(terms, axis=-1)
    return np.where(np.isfinite(value), value, -np.inf)


@dataclass
class StateSpaceModel:
    """Markov transition, observation density and a Gaussian prior around ``x0``."""

    x0: NDArray[np.float64]
    prior_std: float | NDArray[np.float64] = 1.0

    @property
    def dim_x(self) -> int:
        return self.x0.size

    @property
    def dim_y(self) -> int:
        raise NotImplementedError

    def initial_sampler(self, rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        return self.x0 + np.asarray(self.prior_std) * rng.standard_normal((n, self.dim_x))

    def propagate(self, states: NDArray[np.float64], rng: np.random.Generator) -> NDArray:
        """Draw x_t ~ p(x_t | x_{t-1}) for every row."""
        raise NotImplementedError

    def observe(self, states: NDArray[np.float64], rng: np.random.Generator) -> NDArray:
        """Draw y_t ~ p(y_t | x_t) for every row, shape (n, dim_y)."""
        raise NotImplementedError

    def log_likelihood(self, states: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray:
        """log p(y | x) for every row; -inf where the density vanishes."""
        raise NotImplementedError

    def simulate(
        self, steps: int, rng: np.random.Generator
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """True states x_1..x_T started from x0 and their observations."""
        truth = np.empty((steps, self.dim_x))
        obs = np.empty((steps, self.dim_y))
        state = self.x0[None, :]
        for t in range(steps):
            state = self.propagate(state, rng)
            truth[t] = state[0]
            obs[t] = self.observe(state, rng)[0]
        return truth, obs


@dataclass
class ScalarAbsLog(StateSpaceModel):
    """x_t = |x_{t-1}| + v_t, y_t = log(x_t^2) + u_t with unit Gaussian noises."""

    x0: NDArray[np.float64] = field(default_factory=lambda: np.array([1.0]))
    process_std: float = 1.0
    noise_std: float = 1.0

    @property
    def dim_y(self) -> int:
        return 1

    def propagate(self, states, rng):
        return np.abs(states) + self.process_std * rng.standard_normal(states.shape)

    def _mean(self, states: NDArray[np.float64]) -> NDArray[np.float64]:
        with np.errstate(divide="ignore"):
            return np.log(states**2)

    def observe(self, states, rng):
        return self._mean(states) + self.noise_std * rng.standard_normal(states.shape)

    def log_likelihood(self, states, y):
        return _gaussian_loglik(np.asarray(y).reshape(1, 1) - self._mean(states), self.noise_std)


BOT_TRANSITION = np.array(
    [
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)
BOT_NOISE_GAIN = np.array([[0.5, 0.0], [0.0, 0.5], [1.0, 0.0], [0.0, 1.0]])


@dataclass
class BearingsOnlyTracking(StateSpaceModel):
    """Constant-velocity target [p1, p2, v1, v2] observed through its bearing from the origin."""

    x0: NDArray[np.float64] = field(
        default_factory=lambda: np.array([-0.05, 0.001, 0.7, -0.055])
    )
    process_std: float = 0.001
    noise_std: float = 0.005

    @property
    def dim_y(self) -> int:
        return 1

    def propagate(self, states, rng):
        eta = self.process_std * rng.standard_normal((states.shape[0], 2))
        return states @ BOT_TRANSITION.T + eta @ BOT_NOISE_GAIN.T

    def bearing(self, states: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.arctan2(states[:, 0], states[:, 1])[:, None]

    def observe(self, states, rng):
        noise = self.noise_std * rng.standard_normal((states.shape[0], 1))
        return wrap_angle(self.bearing(states) + noise)

    def log_likelihood(self, states, y):
        resid = wrap_angle(np.asarray(y).reshape(1, 1) - self.bearing(states))
        return _gaussian_loglik(resid, self.noise_std)


def coordinated_turn_matrix(gamma: NDArray[np.float64]) -> NDArray[np.float64]:
    """Per-row transition matrices, shape (n, 5, 5), with a guarded gamma -> 0 limit."""
    g = np.asarray(gamma, dtype=float)
    sin_ratio = np.sinc(g / np.pi)  # sin(g) / g
    cos_ratio = -2.0 * np.sin(g / 2.0) ** 2 / np.where(g == 0.0, 1.0, g)  # (cos(g) - 1) / g
    cos_ratio = np.where(g == 0.0, 0.0, cos_ratio)
    c, s = np.cos(g), np.sin(g)
    mats = np.zeros((g.size, 5, 5))
    mats[:, 0, 0] = mats[:, 1, 1] = mats[:, 4, 4] = 1.0
    mats[:, 0, 2], mats[:, 0, 3] = sin_ratio, cos_ratio
    mats[:, 1, 2], mats[:, 1, 3] = cos_ratio, sin_ratio
    mats[:, 2, 2], mats[:, 2, 3] = c, -s
    mats[:, 3, 2], mats[:, 3, 3] = s, c
    return mats


SENSOR_KINDS = ("bearing", "signal_strength", "range", "radial_velocity")
SENSOR_STD = {"bearing": 0.175, "signal_strength": 2.0, "range": 0.14, "radial_velocity": 0.004}


@dataclass
class CoordinatedTurn(StateSpaceModel):
    """Nearly coordinated turn [p1, p2, v1, v2, gamma] observed by a field of mixed sensors.

    Sensor i has kind ``SENSOR_KINDS[kinds[i]]`` and sits at ``sensors[i]``.
    """

    x0: NDArray[np.float64] = field(
        default_factory=lambda: np.array([-1.0, -2.0, 0.6, 0.0, 0.139])
    )
    process_var: NDArray[np.float64] = field(
        default_factory=lambda: np.array([0.05, 0.05, 0.04, 0.04, 0.0])
    )
    sensors: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, 2)))
    kinds: NDArray[np.intp] = field(default_factory=lambda: np.zeros(0, dtype=np.intp))
    strength_offset: float = 1e-4

    @classmethod
    def with_sensor_field(
        cls, k: int, rng: np.random.Generator, region: float = 3.0, **kwargs
    ) -> "CoordinatedTurn":
        """K sensors drawn uniformly in [-region, region]^2, a quarter of each kind."""
        sensors = rng.uniform(-region, region, size=(k, 2))
        kinds = np.arange(k) * len(SENSOR_KINDS) // k
        return cls(sensors=sensors, kinds=kinds, **kwargs)

    @property
    def dim_y(self) -> int:
        return self.sensors.shape[0]

    @property
    def sensor_std(self) -> NDArray[np.float64]:
        return np.array([SENSOR_STD[SENSOR_KINDS[k]] for k in self.kinds])

    def propagate(self, states, rng):
        moved = np.einsum("nij,nj->ni", coordinated_turn_matrix(states[:, 4]), states)
        return moved + np.sqrt(self.process_var) * rng.standard_normal(states.shape)

    def measure(
        self, states: NDArray[np.float64], subset: Optional[NDArray[np.intp]] = None
    ) -> NDArray[np.float64]:
        """Noise-free readings, shape (n, |subset|)."""
        idx = np.arange(self.dim_y) if subset is None else np.asarray(subset, dtype=np.intp)
        offset = states[:, None, :2] - self.sensors[None, idx, :]
        dist_sq = np.sum(offset**2, axis=-1)
        dist = np.sqrt(dist_sq)
        kinds = self.kinds[idx][None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.sum(offset * states[:, None, 2:4], axis=-1) / dist
            out = np.select(
                [kinds == 0, kinds == 1, kinds == 2],
                [
                    np.arctan2(offset[..., 0], offset[..., 1]),
                    1.0 / (dist_sq + self.strength_offset),
                    dist,
                ],
                default=radial,
            )
        return out

    def observe(self, states, rng):
        clean = self.measure(states)
        noisy = clean + self.sensor_std * rng.standard_normal(clean.shape)
        bearing = self.kinds == 0
        noisy[:, bearing] = wrap_angle(noisy[:, bearing])
        return noisy

    def log_likelihood(self, states, y, subset: Optional[NDArray[np.intp]] = None):
        idx = np.arange(self.dim_y) if subset is None else np.asarray(subset, dtype=np.intp)
        if idx.size == 0:
            return np.zeros(states.shape[0])
        resid = np.asarray(y)[idx][None, :] - self.measure(states, idx)
        bearing = self.kinds[idx] == 0
        resid[:, bearing] = wrap_angle(resid[:, bearing])
        return _gaussian_loglik(resid, self.sensor_std[idx])


@dataclass
class LinearGaussian(StateSpaceModel):
    """x_t = A x_{t-1} + N(0, Q), y_t = H x_t + N(0, R)."""

    x0: NDArray[np.float64] = field(default_factory=lambda: np.zeros(1))
    transition: NDArray[np.float64] = field(default_factory=lambda: np.eye(1))
    process_cov: NDArray[np.float64] = field(default_factory=lambda: np.eye(1))
    observation: NDArray[np.float64] = field(default_factory=lambda: np.eye(1))
    noise_cov: NDArray[np.float64] = field(default_factory=lambda: np.eye(1))

    @property
    def dim_y(self) -> int:
        return self.observation.shape[0]

    def _noise(self, cov: NDArray[np.float64], n: int, rng: np.random.Generator) -> NDArray:
        # eigh tolerates the singular covariances of noiseless models
        vals, vecs = np.linalg.eigh(cov)
        root = vecs * np.sqrt(np.clip(vals, 0.0, None))
        return rng.standard_normal((n, cov.shape[0])) @ root.T

    def propagate(self, states, rng):
        return states @ self.transition.T + self._noise(self.process_cov, states.shape[0], rng)

    def observe(self, states, rng):
        return states @ self.observation.T + self._noise(self.noise_cov, states.shape[0], rng)

    def log_likelihood(self, states, y):
        resid = np.asarray(y)[None, :] - states @ self.observation.T
        chol = np.linalg.cholesky(self.noise_cov)
        z = np.linalg.solve(chol, resid.T)
        log_det = 2.0 * np.sum(np.log(np.diag(chol)))
        return -0.5 * (np.sum(z**2, axis=0) + log_det + self.dim_y * np.log(2.0 * np.pi))

    @property
    def prior_cov(self) -> NDArray[np.float64]:
        std = np.broadcast_to(np.asarray(self.prior_std, dtype=float), (self.dim_x,))
        return np.diag(std**2)

