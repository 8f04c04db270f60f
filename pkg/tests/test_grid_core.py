import numpy as np
import pytest

from modules.exceptions import ArgumentError, DataError
from modules.grid_core import (Field, Grid, OceanMask, area_weights, coarsen, remove_global_mean, shared_mask,
                               weighted_mean)


def test_regular_grid_centers():
    grid = Grid.regular(180, 90)
    assert grid.shape == (90, 180)
    assert grid.lats[0] == pytest.approx(-89.0)
    assert grid.lats[-1] == pytest.approx(89.0)
    assert grid.lons[0] == pytest.approx(1.0)


def test_grid_rejects_pole_centers():
    with pytest.raises(ArgumentError):
        Grid(n_lon=4, n_lat=3, lon0=0.0, lat0=-90.0, d_lon=90.0, d_lat=90.0)
    with pytest.raises(ArgumentError):
        Grid(n_lon=0, n_lat=3, lon0=0.0, lat0=-60.0, d_lon=90.0, d_lat=60.0)


def test_canonical_order_is_south_to_north(small_mask):
    lats = small_mask.point_lats
    assert np.all(np.diff(lats) >= 0)
    lat_idx, lon_idx = small_mask.indices
    assert lat_idx[0] == 0 and lon_idx[0] == 0


def test_gather_scatter_inverse(small_mask, rng):
    points = rng.normal(size=small_mask.ocean_count)
    lattice = small_mask.scatter(points)
    assert np.isnan(lattice[5]).all()
    np.testing.assert_array_equal(small_mask.gather(lattice), points)


def test_area_weight_at_sixty_degrees():
    grid = Grid(n_lon=2, n_lat=2, lon0=0.0, lat0=0.0, d_lon=180.0, d_lat=60.0)
    mask = OceanMask(grid, np.array([[True, False], [True, False]]))
    w = area_weights(mask)
    assert w[1] == pytest.approx(0.5)
    assert weighted_mean(np.array([1.0, -1.0]), w) == pytest.approx(1.0 / 3.0)


def test_area_weights_equator_one_poles_small():
    grid = Grid(n_lon=1, n_lat=3, lon0=0.0, lat0=-89.0, d_lon=360.0, d_lat=89.0)
    w = area_weights(OceanMask.all_ocean(grid))
    assert w[1] == pytest.approx(1.0)
    assert w[0] == pytest.approx(np.cos(np.deg2rad(89.0)))


def test_weighted_mean_matches_loop(rng):
    for _ in range(100):
        x = rng.normal(size=30)
        w = rng.uniform(0.1, 1.0, size=30)
        expected = sum(wi * xi for wi, xi in zip(w, x)) / sum(w)
        assert weighted_mean(x, w) == pytest.approx(expected, abs=1e-12)


def test_weighted_mean_constant_field():
    w = np.array([0.2, 0.5, 1.0])
    assert weighted_mean(np.full(3, 4.25), w) == pytest.approx(4.25, abs=1e-15)


@pytest.mark.parametrize("x,w", [
    (np.ones(3), np.ones(4)),
    (np.array([]), np.array([])),
    (np.array([1.0, np.nan]), np.ones(2)),
])
def test_weighted_mean_rejects_bad_input(x, w):
    with pytest.raises(ArgumentError):
        weighted_mean(x, w)


def test_remove_global_mean_zero_and_idempotent(small_mask, rng):
    w = area_weights(small_mask)
    for _ in range(100):
        field = Field.from_points(small_mask, rng.normal(3.0, 2.0, size=small_mask.ocean_count))
        once = remove_global_mean(field, small_mask)
        assert abs(weighted_mean(once.to_points(small_mask), w)) < 1e-10
        twice = remove_global_mean(once, small_mask)
        np.testing.assert_allclose(twice.to_points(small_mask), once.to_points(small_mask), atol=1e-12)
        assert np.isnan(once.values[5]).all()


def test_field_missing_ocean_value_is_data_error(small_mask):
    values = np.zeros(small_mask.grid.shape)
    values[0, 0] = np.nan
    with pytest.raises(DataError):
        Field(small_mask.grid, values).to_points(small_mask)


def test_coarsen_majority_mask():
    values = np.array([[1.0, 3.0, np.nan, np.nan],
                       [5.0, 7.0, np.nan, 2.0]])
    grid = Grid(n_lon=4, n_lat=4, lon0=45.0, lat0=-67.5, d_lon=90.0, d_lat=45.0)
    field = Field(grid, np.vstack([values, values]))
    coarse = coarsen(field, 2)
    assert coarse.grid.shape == (2, 2)
    assert coarse.values[0, 0] == pytest.approx(4.0)
    # one valid cell out of four is not a majority
    assert np.isnan(coarse.values[0, 1])
    assert coarse.grid.lon0 == pytest.approx(90.0)


def test_coarsen_rejects_non_divisor(small_grid):
    with pytest.raises(ArgumentError):
        coarsen(Field(small_grid, np.zeros(small_grid.shape)), 5)


def test_shared_mask_intersection(small_grid, small_mask):
    other = np.ones(small_grid.shape, dtype=bool)
    other[0, :3] = False
    combined = shared_mask([small_mask, OceanMask(small_grid, other)])
    assert combined.ocean_count == small_mask.ocean_count - 3
    assert not combined.mask[5].any()


def test_coarsen_by_one_is_identity(small_mask, rng):
    field = Field.from_points(small_mask, rng.normal(size=small_mask.ocean_count))
    same = coarsen(field, 1)
    assert same.grid == field.grid
    np.testing.assert_array_equal(same.values, field.values)


def test_coarsen_matches_block_loop(rng):
    field = Field(Grid.regular(360, 180), rng.normal(size=(180, 360)))
    coarse = coarsen(field, 4)
    assert coarse.grid.shape == (45, 90)
    expected = np.empty((45, 90))
    for i in range(45):
        for j in range(90):
            total = 0.0
            for a in range(4):
                for b in range(4):
                    total += field.values[4 * i + a, 4 * j + b]
            expected[i, j] = total / 16
    np.testing.assert_allclose(coarse.values, expected, atol=1e-12)
    assert coarse.grid.lats[0] == pytest.approx(-88.0)


def test_coarsen_commutes_with_constant(rng):
    values = rng.normal(size=(8, 12))
    grid = Grid.regular(12, 8)
    shifted = coarsen(Field(grid, values + 3.5), 2).values
    np.testing.assert_allclose(shifted, coarsen(Field(grid, values), 2).values + 3.5, atol=1e-12)
