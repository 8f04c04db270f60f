import numpy as np
import pytest

from modules.evalmetrics import (ModelPair, leave_one_out, model_spread, model_trends, persistence, rms_variability,
                                 score, uncertainty_spread_overlap, weighted_pearson, weighted_rmse)
from modules.exceptions import ArgumentError, DegenerateInputError
from modules.grid_core import Field, Grid, OceanMask, area_weights, remove_global_mean
from modules.neuralnet import ArchitecturePolicy, TrainConfig
from modules.segmentation import Partition
from modules.trend import TimeSeriesStack, TrendMap

NAMES = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot"]
SCALES = np.array([0.6, 0.8, 1.0, 1.2, 1.4, 1.6])


def test_weighted_scores_match_loops(rng):
    for _ in range(100):
        a, b = rng.normal(size=(2, 40))
        w = rng.uniform(0.1, 1.0, size=40)
        num = sum(wi * (ai - bi) ** 2 for ai, bi, wi in zip(a, b, w))
        assert weighted_rmse(a, b, w) == pytest.approx(np.sqrt(num / w.sum()), rel=1e-12)
        ma, mb = np.average(a, weights=w), np.average(b, weights=w)
        cov = sum(wi * (ai - ma) * (bi - mb) for ai, bi, wi in zip(a, b, w))
        va = sum(wi * (ai - ma) ** 2 for ai, wi in zip(a, w))
        vb = sum(wi * (bi - mb) ** 2 for bi, wi in zip(b, w))
        assert weighted_pearson(a, b, w) == pytest.approx(cov / np.sqrt(va * vb), rel=1e-10, abs=1e-12)


def test_pearson_of_affine_maps(rng):
    a = rng.normal(size=30)
    w = rng.uniform(size=30)
    assert weighted_pearson(a, 3.0 * a + 2.0, w) == pytest.approx(1.0)
    assert weighted_pearson(a, -0.5 * a + 1.0, w) == pytest.approx(-1.0)
    with pytest.raises(DegenerateInputError):
        weighted_pearson(a, np.full(30, 4.0), w)


def test_rms_of_constant_field():
    assert rms_variability(np.full(6, -2.5), np.arange(1.0, 7.0)) == pytest.approx(2.5)


def test_mismatched_shapes_are_rejected():
    with pytest.raises(ArgumentError):
        weighted_rmse(np.zeros(3), np.zeros(4), np.ones(3))


def test_score_report_row(rng):
    a, b = rng.normal(size=(2, 10))
    row = score(a, b, np.ones(10), label="ml", cluster=1).as_row()
    assert row["label"] == "ml"
    assert row["cluster"] == 1
    assert row["rmse"] == pytest.approx(weighted_rmse(a, b, np.ones(10)))


def test_persistence_copies_past_trend(small_mask, rng):
    past = TrendMap(small_mask, rng.normal(size=small_mask.ocean_count), (1993, 2002))
    forecast = persistence(past, (2003, 2012))
    np.testing.assert_array_equal(forecast.slope, past.slope)
    assert forecast.window == (2003, 2012)
    assert forecast.slope is not past.slope


def test_model_spread_is_population_std(small_mask):
    n = small_mask.ocean_count
    trends = [TrendMap(small_mask, np.full(n, v)) for v in (1.0, 3.0)]
    np.testing.assert_allclose(model_spread(trends), 1.0)
    with pytest.raises(ArgumentError):
        model_spread(trends[:1])


def test_uncertainty_spread_overlap(rng):
    spread = rng.uniform(size=20)
    assert uncertainty_spread_overlap(2.0 * spread, spread, np.ones(20)) == pytest.approx(1.0)


@pytest.fixture
def ocean():
    return OceanMask.all_ocean(Grid.regular(12, 6))


def linear_pairs(mask, hind_pattern, proj_pattern):
    """Pure-trend stacks: hindcast over 1993-1995, projection over 1996-1998."""
    def stack(start, slope):
        times = start + (np.arange(36) + 0.5) / 12.0
        return TimeSeriesStack(mask, start, slope[:, None] * (times - times.mean())[None, :])

    return [ModelPair(name, stack(1993, s * hind_pattern), stack(1996, s * proj_pattern))
            for name, s in zip(NAMES, SCALES)]


QUICK = TrainConfig(learning_rate=1e-2, epochs=400, dropout=0.0, validation_fraction=0.0, seed=6)
POLICY = ArchitecturePolicy((16, 8), (8,), 0.5)


def test_leave_one_out_fixed_point_persistence_is_perfect(ocean):
    pattern = np.cos(np.radians(ocean.point_lats)) * np.sin(np.radians(ocean.point_lons))
    pairs = linear_pairs(ocean, pattern, pattern)
    table = leave_one_out(pairs, Partition.single(ocean), TrainConfig(epochs=5, seed=1),
                          (1993, 1995), (1996, 1998), POLICY)
    assert list(table.columns) == ["metric", "method", *NAMES, "average"]
    rows = table.set_index(["metric", "method"])
    for name in NAMES:
        assert rows.loc[("rmse", "persistence"), name] == pytest.approx(0.0, abs=1e-9)
        assert rows.loc[("correlation", "persistence"), name] == pytest.approx(1.0)


def test_leave_one_out_learns_a_shared_relation(ocean, rng):
    p = np.sin(np.radians(ocean.point_lons))
    q = np.cos(np.radians(2.0 * ocean.point_lats)) * np.cos(np.radians(ocean.point_lons))
    hind = np.outer(p, SCALES) + 0.01 * rng.normal(size=(ocean.ocean_count, 6))
    proj = np.outer(q, SCALES)
    pairs = linear_pairs(ocean, p, q)
    table = leave_one_out(pairs, Partition.single(ocean), QUICK, (1993, 1995), (1996, 1998), POLICY,
                          trends=(hind, proj))
    rows = table.set_index(["metric", "method"])
    assert rows.loc[("correlation", "ml"), "average"] > 0.9
    assert rows.loc[("rmse", "ml"), "average"] < rows.loc[("rmse", "persistence"), "average"]


def test_leave_one_out_threads_agree(ocean):
    pattern = np.sin(np.radians(ocean.point_lons))
    pairs = linear_pairs(ocean, pattern, 0.5 * pattern)
    cfg = TrainConfig(epochs=10, seed=2)
    serial = leave_one_out(pairs[:3], Partition.single(ocean), cfg, (1993, 1995), (1996, 1998), POLICY)
    threaded = leave_one_out(pairs[:3], Partition.single(ocean), cfg, (1993, 1995), (1996, 1998), POLICY,
                             threads=3)
    np.testing.assert_array_equal(serial[NAMES[:3]].to_numpy(), threaded[NAMES[:3]].to_numpy())


def test_model_trends_remove_the_global_mean(ocean):
    pattern = np.sin(np.radians(ocean.point_lons)) + 2.0
    pairs = linear_pairs(ocean, pattern, pattern)
    w = area_weights(ocean)
    hind, proj = model_trends(pairs, (1993, 1995), (1996, 1998), w)
    assert hind.shape == (ocean.ocean_count, 6)
    np.testing.assert_allclose(w @ hind / w.sum(), 0.0, atol=1e-9)
    np.testing.assert_allclose(hind, proj, atol=1e-9)


def test_leave_one_out_needs_three_models(ocean):
    pattern = np.sin(np.radians(ocean.point_lons))
    pairs = linear_pairs(ocean, pattern, pattern)[:2]
    with pytest.raises(ArgumentError):
        leave_one_out(pairs, Partition.single(ocean), QUICK, (1993, 1995), (1996, 1998))


def test_rmse_is_a_metric(rng):
    for _ in range(50):
        a, b, c = rng.normal(size=(3, 25))
        w = rng.uniform(0.1, 1.0, size=25)
        assert weighted_rmse(a, b, w) == weighted_rmse(b, a, w)
        assert weighted_rmse(a, c, w) <= weighted_rmse(a, b, w) + weighted_rmse(b, c, w) + 1e-12


def test_removing_global_mean_never_raises_rms(small_mask, rng):
    w = area_weights(small_mask)
    for _ in range(50):
        field = Field.from_points(small_mask, rng.normal(rng.normal(), 1.0, size=small_mask.ocean_count))
        anomaly = remove_global_mean(field, small_mask).to_points(small_mask)
        assert rms_variability(anomaly, w) <= rms_variability(field.to_points(small_mask), w) + 1e-12


def test_leave_one_out_identical_flat_datasets_are_degenerate(ocean):
    flat = np.zeros(ocean.ocean_count)
    pairs = linear_pairs(ocean, flat, flat)
    with pytest.raises(DegenerateInputError):
        leave_one_out(pairs, Partition.single(ocean), QUICK, (1993, 1995), (1996, 1998), POLICY)
