import numpy as np
import pytest

from cmc.core import WeightedSampleSet
from cmc.errors import PartitionError
from cmc.loss import region_costs_stochastic
from cmc.partition import (
    Assignment,
    Partition,
    PartitionStrategy,
    adaptive_refine,
    assign,
    build_equal_count_partition,
    build_partition,
    build_random_grid,
    build_uniform_grid,
    build_voronoi_kmeans,
    fill_regions,
    grid_shape_for_budget,
)


def _normal_set(n: int, d: int, seed: int) -> WeightedSampleSet:
    return WeightedSampleSet.from_weights(np.random.default_rng(seed).standard_normal((n, d)))


def test_uniform_grid_breakpoints_and_half_open_cells():
    s = WeightedSampleSet.from_weights(np.linspace(0.0, 1.0, 101))
    p = build_uniform_grid(s, (4,))
    np.testing.assert_allclose(p.breakpoints[0], [0.25, 0.5, 0.75])
    assert p.region_count == 4
    np.testing.assert_array_equal(p.locate(np.array([[0.5], [0.0], [1.0]])), [2, 0, 3])


@pytest.mark.parametrize("strategy", list(PartitionStrategy))
def test_every_sample_lands_in_exactly_one_region(strategy):
    s = _normal_set(300, 1, seed=5)
    a = assign(build_partition(s, 6, strategy, seed=2), s)
    np.testing.assert_array_equal(np.sort(np.concatenate(a.index_sets)), np.arange(300))
    assert a.counts.sum() == 300


def test_budget_goes_to_the_widest_dimension():
    rng = np.random.default_rng(0)
    s = WeightedSampleSet.from_weights(rng.standard_normal((200, 2)) * [10.0, 1.0])
    shape = grid_shape_for_budget(s, 6)
    assert int(np.prod(shape)) == 6
    assert shape[0] >= shape[1]


def test_equal_count_cells_share_the_mass():
    s = _normal_set(10_000, 1, seed=1)
    a = assign(build_equal_count_partition(s, 10), s)
    np.testing.assert_array_equal(a.counts, np.full(10, 1000))


def test_equal_count_rejects_multivariate_and_weighted_sets():
    with pytest.raises(PartitionError):
        build_equal_count_partition(_normal_set(20, 2, seed=0), 4)
    weighted = WeightedSampleSet.from_weights(np.arange(5.0), np.ones(5))
    with pytest.raises(PartitionError):
        build_equal_count_partition(weighted, 2)


def test_kmeans_finds_separated_clusters():
    rng = np.random.default_rng(4)
    points = np.vstack(
        [rng.normal(0.0, 0.1, (50, 2)), rng.normal(10.0, 0.1, (50, 2))]
    )
    p = build_voronoi_kmeans(WeightedSampleSet.from_weights(points), 2, rng_seed=9)
    centroids = p.centroids[np.argsort(p.centroids[:, 0])]
    np.testing.assert_allclose(centroids, [[0.0, 0.0], [10.0, 10.0]], atol=0.2)


def test_kmeans_needs_enough_distinct_points():
    s = WeightedSampleSet.from_weights([[0.0], [0.0], [1.0]])
    with pytest.raises(PartitionError):
        build_voronoi_kmeans(s, 3, rng_seed=0)


def test_random_grid_is_reproducible():
    s = _normal_set(100, 2, seed=3)
    first = build_random_grid(s, (3, 2), rng_seed=42)
    second = build_random_grid(s, (3, 2), rng_seed=42)
    for a, b in zip(first.breakpoints, second.breakpoints):
        np.testing.assert_array_equal(a, b)


def test_zero_range_dimension_collapses_with_warning():
    points = np.column_stack([np.linspace(0, 1, 20), np.zeros(20)])
    p = build_uniform_grid(WeightedSampleSet.from_weights(points), (2, 3))
    assert p.cells_per_dim == (2, 1)
    assert p.warnings


def test_grid_and_box_views_agree():
    s = _normal_set(200, 2, seed=8)
    grid = build_uniform_grid(s, (3, 2))
    lower, upper = grid.boxes()
    boxes = Partition(kind="boxes", dim=2, lower=lower, upper=upper)
    np.testing.assert_array_equal(boxes.locate(s.points), grid.locate(s.points))


def test_adaptive_refinement_reaches_budget_and_lowers_loss():
    s = WeightedSampleSet.from_weights(np.random.default_rng(2).uniform(0, 1, (200, 1)))

    def h(x):
        return x[:, 0]

    initial = build_uniform_grid(s, (1,))
    refined = adaptive_refine(s, h, initial, max_regions=4)
    assert refined.kind == "boxes"
    assert refined.region_count == 4
    a = assign(refined, s)
    assert a.counts.sum() == s.size
    before = region_costs_stochastic(s, Assignment.single(s.size), h).total
    after = region_costs_stochastic(s, a, h).total
    assert after < before


def test_adaptive_refinement_stops_on_loss_threshold():
    s = WeightedSampleSet.from_weights(np.linspace(0.0, 1.0, 64))
    initial = build_uniform_grid(s, (1,))
    refined = adaptive_refine(s, lambda x: x[:, 0], initial, loss_threshold=1e-3)
    costs = region_costs_stochastic(s, assign(refined, s), lambda x: x[:, 0])
    assert costs.total < 1e-3


def test_adaptive_refinement_needs_a_stopping_rule():
    s = _normal_set(10, 1, seed=0)
    with pytest.raises(PartitionError):
        adaptive_refine(s, lambda x: x[:, 0], build_uniform_grid(s, (1,)))


def test_fill_regions_splits_crowded_cells_until_m_are_live():
    points = np.concatenate([np.zeros(5), np.linspace(10.0, 11.0, 95)])
    s = WeightedSampleSet.from_weights(points)
    a = assign(build_uniform_grid(s, (10,)), s)
    assert np.count_nonzero(a.counts) < 10
    filled = fill_regions(s, a, 10)
    assert filled.region_count == 10
    assert np.all(filled.counts > 0)
    assert filled.counts.sum() == s.size
    assert sorted(np.concatenate(filled.index_sets).tolist()) == list(range(s.size))


def test_fill_regions_splits_ties_and_reaches_n():
    s = WeightedSampleSet.from_weights(np.zeros(6))
    filled = fill_regions(s, Assignment.single(6), 6)
    np.testing.assert_array_equal(filled.counts, np.ones(6))


def test_fill_regions_rejects_impossible_budgets():
    s = _normal_set(20, 2, seed=4)
    a = assign(build_uniform_grid(s, (3, 3)), s)
    with pytest.raises(PartitionError):
        fill_regions(s, a, 21)
    with pytest.raises(PartitionError):
        fill_regions(s, a, 1)


@pytest.mark.parametrize(("cap", "regions"), [(1, 3), (3, 3), (5, 5)])
def test_adaptive_refinement_cap_is_inclusive(cap, regions):
    s = WeightedSampleSet.from_weights(np.random.default_rng(8).uniform(0, 1, (100, 1)))
    initial = build_uniform_grid(s, (3,))
    refined = adaptive_refine(s, lambda x: x[:, 0] ** 2, initial, max_regions=cap)
    assert refined.region_count == regions
