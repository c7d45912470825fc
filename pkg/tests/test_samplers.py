import numpy as np
import pytest

from cmc.errors import ConfigError, DegenerateWeightsError
from cmc.core import marginal_likelihood
from cmc.samplers import ChainConfig, clais, lais_weights, mh_random_walk, pmc
from cmc.targets import (
    DEFAULT_PLANETS,
    RadialVelocityModel,
    SensorNetwork,
    gamma_target,
    gaussian_mixture_target,
)


def _std_normal(x):
    x = np.atleast_2d(x)
    return -0.5 * (x.shape[1] * np.log(2 * np.pi) + np.sum(x**2, axis=1))


def test_single_state_chain_is_the_initial_point():
    cfg = ChainConfig(length=1, proposal_cov=np.eye(2), initial=np.array([0.5, -0.5]), seed=0)
    chain = mh_random_walk(_std_normal, cfg)
    np.testing.assert_array_equal(chain.states, [[0.5, -0.5]])


def test_random_walk_targets_the_standard_normal():
    cfg = ChainConfig(length=100_000, proposal_cov=np.eye(1), initial=np.zeros(1), seed=1)
    chain = mh_random_walk(_std_normal, cfg)
    assert chain.states.mean() == pytest.approx(0.0, abs=0.05)
    assert chain.states.var() == pytest.approx(1.0, abs=0.1)
    assert 0.2 < chain.acceptance_rate < 0.9


def test_chain_stays_inside_the_support():
    def half_line(x):
        return np.where(x[:, 0] > 0, -x[:, 0], -np.inf)

    cfg = ChainConfig(length=2000, proposal_cov=np.eye(1), initial=np.ones(1), seed=2)
    assert mh_random_walk(half_line, cfg).states.min() > 0


def test_chain_config_validation():
    with pytest.raises(ConfigError):
        ChainConfig(length=0, proposal_cov=np.eye(1), initial=np.zeros(1), seed=0)
    with pytest.raises(ConfigError):
        ChainConfig(length=5, proposal_cov=np.eye(2), initial=np.zeros(1), seed=0)
    with pytest.raises(ConfigError):
        ChainConfig(length=5, proposal_cov=-np.eye(1), initial=np.zeros(1), seed=0)
    cfg = ChainConfig(length=5, proposal_cov=np.eye(1), initial=np.array([-1.0]), seed=0)
    with pytest.raises(ConfigError):
        mh_random_walk(lambda x: np.where(x[:, 0] > 0, 0.0, -np.inf), cfg)


def test_pmc_estimates_the_evidence():
    s = pmc(lambda x: _std_normal(x) + np.log(3.0), 500, 10, np.zeros((1, 2)), seed=4)
    assert s.size == 500
    assert marginal_likelihood(s) == pytest.approx(3.0, rel=0.25)


def test_pmc_fails_without_support():
    with pytest.raises(DegenerateWeightsError):
        pmc(lambda x: np.full(x.shape[0], -np.inf), 10, 2, np.zeros((1, 1)), seed=0)


def test_single_mean_lais_weight_is_the_plain_ratio():
    x, mu = np.array([[0.3]]), np.array([[-0.2]])
    expected = np.exp(_std_normal(x) - _std_normal(x - mu))
    np.testing.assert_allclose(lais_weights(x, mu, np.eye(1), _std_normal), expected)


def test_clais_estimates_the_evidence_with_m_kernels():
    cfg = ChainConfig(length=2000, proposal_cov=np.eye(2), initial=np.zeros(2), seed=6)
    result = clais(_std_normal, cfg, m=10)
    assert result.log_z == pytest.approx(0.0, abs=0.15)
    assert result.target_evaluations == 2000
    assert result.kernel_evaluations == 2000 * result.mixture.size
    assert result.mixture.size <= 10


def test_clais_needs_fewer_kernels_than_states():
    cfg = ChainConfig(length=10, proposal_cov=np.eye(1), initial=np.zeros(1), seed=0)
    with pytest.raises(ConfigError):
        clais(_std_normal, cfg, m=10)


def test_scalar_targets_report_their_moments():
    rng = np.random.default_rng(0)
    gamma = gamma_target()
    assert (gamma.mean, gamma.variance) == (2.0, 1.0)
    assert gamma.sample(rng, 5).shape == (5, 1)
    mixture = gaussian_mixture_target()
    assert mixture.mean == pytest.approx(1.0)
    assert mixture.variance == pytest.approx(0.5 * (1 + 4) + 0.5 * (0.25 + 16) - 1.0)
    assert mixture.pdf([1.0]).shape == (1,)


def test_sensor_posterior_is_zero_outside_the_prior_box():
    net = SensorNetwork()
    log_target = net.log_posterior(net.simulate(np.random.default_rng(1)))
    values = log_target(np.array([[2.5, 2.5], [40.0, 0.0]]))
    assert np.isfinite(values[0])
    assert values[1] == -np.inf


def test_radial_velocity_dimensions_and_support():
    rng = np.random.default_rng(2)
    model = RadialVelocityModel(n_planets=1)
    assert model.dim == 6
    data = model.simulate(DEFAULT_PLANETS[1], rng)
    assert data.shape == model.times.shape
    log_target = model.log_posterior(data)
    inside = np.array(DEFAULT_PLANETS[1])[None, :]
    outside = inside.copy()
    outside[0, 3] = 1.5
    assert np.isfinite(log_target(inside)[0])
    assert log_target(outside)[0] == -np.inf
    assert model.sample_prior(rng, 7).shape == (7, 6)


def test_clais_counts_what_it_evaluates():
    batches = []

    def counted(x):
        batches.append(np.atleast_2d(x).shape[0])
        return _std_normal(x)

    cfg = ChainConfig(length=300, proposal_cov=np.eye(1), initial=np.zeros(1), seed=2)
    result = clais(counted, cfg, m=4, source="samples")
    assert result.target_evaluations == batches[-1] == 300
    assert result.kernel_evaluations == 300 * result.mixture.size
