import numpy as np
import pytest

from cmc.filters import (
    BearingsOnlyTracking,
    CoordinatedTurn,
    DistributedSetup,
    LinearGaussian,
    ScalarAbsLog,
    bpf,
    cmc_dpf,
    cpf,
    gaussian_dpf,
    gpf,
    igpf,
    kalman_filter,
    mse,
)
from cmc.filters.distributed import assign_sensors, processor_grid
from cmc.filters.models import coordinated_turn_matrix, wrap_angle
from cmc.partition import PartitionStrategy


def test_wrap_angle_stays_in_range():
    wrapped = wrap_angle(np.array([0.0, 3 * np.pi / 2, -3 * np.pi / 2, 7.0]))
    np.testing.assert_allclose(wrapped, [0.0, -np.pi / 2, np.pi / 2, 7.0 - 2 * np.pi])


def test_turn_matrix_reduces_to_constant_velocity():
    mats = coordinated_turn_matrix(np.array([0.0, 1e-9]))
    expected = np.eye(5)
    expected[0, 2] = expected[1, 3] = 1.0
    np.testing.assert_allclose(mats[0], expected)
    np.testing.assert_allclose(mats[1], expected, atol=1e-8)


def test_bearing_is_measured_from_the_origin():
    model = BearingsOnlyTracking()
    states = np.array([[1.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]])
    np.testing.assert_allclose(model.bearing(states)[:, 0], [np.pi / 4, np.pi / 2])


def test_simulation_shapes():
    truth, obs = ScalarAbsLog().simulate(12, np.random.default_rng(0))
    assert truth.shape == (12, 1)
    assert obs.shape == (12, 1)


def test_bootstrap_filter_is_reproducible():
    model = ScalarAbsLog()
    _, obs = model.simulate(10, np.random.default_rng(1))
    first, second = bpf(model, obs, 200, seed=3), bpf(model, obs, 200, seed=3)
    np.testing.assert_array_equal(first.estimates, second.estimates)
    assert first.total_evaluations == 200 * 10


def test_trajectory_csv(tmp_path):
    model = ScalarAbsLog()
    _, obs = model.simulate(4, np.random.default_rng(1))
    result = bpf(model, obs, 50, seed=3)
    path = tmp_path / "trajectory.csv"
    result.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x_hat_1,evals"
    assert [line.split(",")[0] for line in lines[1:]] == ["1", "2", "3", "4"]
    assert float(lines[1].split(",")[1]) == result.estimates[0, 0]
    assert lines[-1].endswith(",50")


def test_bootstrap_filter_tracks_the_kalman_means():
    model = LinearGaussian(transition=np.array([[0.9]]))
    _, obs = model.simulate(20, np.random.default_rng(2))
    exact = kalman_filter(model, obs)
    result = bpf(model, obs, 5000, seed=4)
    assert np.max(np.abs(result.estimates - exact.means)) < 0.1


@pytest.mark.parametrize(
    "strategy", [PartitionStrategy.UNIFORM_GRID, PartitionStrategy.RANDOM_GRID]
)
def test_compressed_filter_evaluates_exactly_m_likelihoods(strategy):
    model = ScalarAbsLog()
    truth, obs = model.simulate(50, np.random.default_rng(1))
    result = cpf(model, obs, 1000, 200, seed=1, partition_strategy=strategy)
    np.testing.assert_array_equal(result.evaluations, np.full(50, 200))
    assert result.total_evaluations == 200 * 50
    assert np.isfinite(mse(result, truth))


def test_compressed_filter_counts_m_in_two_dimensions():
    eye = np.eye(2)
    model = LinearGaussian(
        x0=np.zeros(2), transition=0.9 * eye, process_cov=eye, observation=eye, noise_cov=eye
    )
    _, obs = model.simulate(6, np.random.default_rng(3))
    result = cpf(model, obs, 300, 7, seed=2)
    np.testing.assert_array_equal(result.evaluations, np.full(6, 7))


def test_gaussian_filters_evaluate_n_likelihoods_per_step():
    model = ScalarAbsLog()
    _, obs = model.simulate(8, np.random.default_rng(4))
    for result in (
        bpf(model, obs, 250, seed=5),
        gpf(model, obs, 250, seed=5),
        igpf(model, obs, 250, 10, seed=5),
    ):
        np.testing.assert_array_equal(result.evaluations, np.full(8, 250))


def test_compressed_filter_with_m_equal_n_close_to_bootstrap():
    model = LinearGaussian(transition=np.array([[0.9]]))
    truth, obs = model.simulate(10, np.random.default_rng(7))
    exact = kalman_filter(model, obs)
    result = cpf(model, obs, 2000, 2000, seed=8)
    assert np.max(np.abs(result.estimates - exact.means)) < 0.15


def test_gaussian_filter_is_igpf_with_one_kernel():
    model = ScalarAbsLog()
    _, obs = model.simulate(8, np.random.default_rng(9))
    np.testing.assert_array_equal(
        gpf(model, obs, 300, seed=10).estimates, igpf(model, obs, 300, 1, seed=10).estimates
    )


def test_filters_reject_bad_budgets():
    model = ScalarAbsLog()
    obs = np.zeros((3, 1))
    with pytest.raises(ValueError):
        cpf(model, obs, 10, 11, seed=0)
    with pytest.raises(ValueError):
        igpf(model, obs, 10, 0, seed=0)
    with pytest.raises(ValueError):
        bpf(model, obs, 1, seed=0)


def test_mse_checks_shapes():
    with pytest.raises(ValueError):
        mse(np.zeros((3, 2)), np.zeros((3, 1)))
    assert mse(np.ones((2, 2)), np.zeros((2, 2))) == 1.0


def test_processor_grid_and_sensor_assignment():
    processors = processor_grid(4, region=3.0)
    np.testing.assert_allclose(np.sort(processors[:, 0]), [-1.5, -1.5, 1.5, 1.5])
    sensors = np.array([[-2.0, -2.0], [2.0, 2.0], [2.0, -2.0]])
    sets = assign_sensors(sensors, processors)
    assert sorted(np.concatenate(sets).tolist()) == [0, 1, 2]
    assert processor_grid(8).shape == (8, 2)


def _turn_problem(k: int, steps: int, seed: int):
    rng = np.random.default_rng(seed)
    model = CoordinatedTurn.with_sensor_field(k, rng)
    truth, obs = model.simulate(steps, rng)
    return model, truth, obs


def test_sensor_field_mixes_all_kinds():
    model, _, obs = _turn_problem(8, 3, seed=11)
    assert obs.shape == (3, 8)
    np.testing.assert_array_equal(np.bincount(model.kinds), [2, 2, 2, 2])
    assert len(DistributedSetup.for_model(model, 2).sensor_sets) == 2


def test_distributed_filters_produce_finite_estimates():
    model, truth, obs = _turn_problem(8, 3, seed=12)
    compressed = cmc_dpf(model, obs, 100, nodes=2, m=2, seed=13)
    baseline = gaussian_dpf(model, obs, 100, nodes=2, seed=13)
    for result in (compressed, baseline):
        assert result.estimates.shape == truth.shape
        assert np.all(np.isfinite(result.estimates))
        assert np.isfinite(mse(result, truth))
