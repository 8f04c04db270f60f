import numpy as np
import pytest

from modules.exceptions import ArgumentError, DegenerateInputError
from modules.grid_core import Grid, OceanMask
from modules.segmentation import (DomainBoxes, Partition, build_affinity, domain_partition, kmeans,
                                  normalized_laplacian, spectral_cluster, spectral_embedding, zscore_rows)


def same_partition(a, b):
    """Equal up to a relabeling of clusters."""
    pairs = set(zip(np.asarray(a).tolist(), np.asarray(b).tolist()))
    return len(pairs) == len(set(a)) == len(set(b))


def block_features(rng, n_per_block=100, d=48, noise=0.05):
    t = np.arange(d)
    families = [np.sin(2 * np.pi * 3 * t / d), np.cos(2 * np.pi * 3 * t / d)]
    rows = [f + noise * rng.normal(size=(n_per_block, d)) for f in families]
    return np.vstack(rows), np.repeat([0, 1], n_per_block)


def test_zscore_rows_constant_row_is_zero():
    z = zscore_rows(np.array([[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]]))
    np.testing.assert_allclose(z[0].mean(), 0.0, atol=1e-15)
    np.testing.assert_allclose(z[0].std(), 1.0)
    np.testing.assert_array_equal(z[1], 0.0)


def test_affinity_orthogonal_series_identity():
    d = 24
    t = np.arange(d)
    x = np.vstack([np.sin(2 * np.pi * t / d), np.cos(2 * np.pi * t / d), np.sin(2 * np.pi * 2 * t / d)])
    affinity = build_affinity(x, sigma=3.0)
    assert affinity.a[0, 0] == 1.0
    assert affinity.a[0, 1] == pytest.approx(np.exp(-d / 9.0), rel=1e-10)


def test_affinity_matches_double_loop(rng):
    x = rng.normal(size=(50, 20))
    affinity = build_affinity(x)
    z = (x - x.mean(axis=1, keepdims=True)) / x.std(axis=1, keepdims=True)
    expected = np.empty((50, 50))
    for i in range(50):
        for j in range(50):
            d2 = np.sum((z[i] - z[j]) ** 2)
            expected[i, j] = np.exp(-d2 / (2.0 * affinity.sigma ** 2))
    np.testing.assert_allclose(affinity.a, expected, atol=1e-12)
    np.testing.assert_array_equal(affinity.a, affinity.a.T)


def test_affinity_identical_rows_is_degenerate():
    with pytest.raises(DegenerateInputError):
        build_affinity(np.tile(np.arange(5.0), (4, 1)))


def test_knn_affinity_is_symmetric(rng):
    a = build_affinity(rng.normal(size=(40, 10)), knn=5).a
    np.testing.assert_array_equal(a, a.T)
    assert np.all((a > 0).sum(axis=1) >= 6)


def test_laplacian_spectrum_bounds(rng):
    for _ in range(5):
        a = build_affinity(rng.normal(size=(60, 12))).a.copy()
        np.fill_diagonal(a, 0.0)
        eigenvalues = np.linalg.eigvalsh(normalized_laplacian(a))
        assert eigenvalues.min() >= -1e-9
        assert eigenvalues.max() <= 2.0 + 1e-9
        assert eigenvalues.min() <= 1e-9


def test_laplacian_isolated_point_is_named():
    a = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(DegenerateInputError, match="Point 2"):
        normalized_laplacian(a)


def test_block_diagonal_embedding_rows_identical():
    a = np.zeros((9, 9))
    a[:4, :4] = 1.0
    a[4:, 4:] = 1.0
    np.fill_diagonal(a, 0.0)
    embedding, eigenvalues = spectral_embedding(a, 2)
    np.testing.assert_allclose(eigenvalues, 0.0, atol=1e-9)
    np.testing.assert_allclose(embedding[:4], np.tile(embedding[0], (4, 1)), atol=1e-6)
    np.testing.assert_allclose(embedding[4:], np.tile(embedding[4], (5, 1)), atol=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_spectral_recovers_blocks(seed):
    features, truth = block_features(np.random.default_rng(seed))
    partition = spectral_cluster(features, 2, seed)
    assert partition.k == 2
    assert same_partition(partition.labels, truth)


def test_spectral_k1_is_single_cluster(rng):
    partition = spectral_cluster(rng.normal(size=(20, 8)), 1, seed=0)
    np.testing.assert_array_equal(partition.labels, 0)


def test_spectral_invariant_to_point_order():
    rng = np.random.default_rng(3)
    d = 36
    t = np.arange(d)
    families = [np.sin(2 * np.pi * t / d), np.cos(2 * np.pi * t / d), np.sin(2 * np.pi * 4 * t / d)]
    features = np.vstack([f + 0.05 * rng.normal(size=(10, d)) for f in families])
    perm = rng.permutation(30)
    base = spectral_cluster(features, 3, seed=11).labels
    permuted = spectral_cluster(features[perm], 3, seed=11).labels
    restored = np.empty_like(permuted)
    restored[perm] = permuted
    assert same_partition(base, restored)


def test_kmeans_seeded_and_separated():
    x = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 5.0], [5.1, 5.0], [5.0, 5.1]])
    labels, centers = kmeans(x, 2, seed=4)
    assert same_partition(labels, [0, 0, 0, 1, 1, 1])
    again, _ = kmeans(x, 2, seed=4)
    np.testing.assert_array_equal(labels, again)
    assert centers.shape == (2, 2)


def test_kmeans_duplicate_points_stay_nonempty():
    x = np.array([[1.0, 1.0]] * 5 + [[2.0, 2.0]])
    labels, _ = kmeans(x, 3, seed=0)
    assert np.bincount(labels, minlength=3).min() >= 1


def test_kmeans_rejects_too_many_clusters():
    with pytest.raises(ArgumentError):
        kmeans(np.zeros((3, 2)), 4, seed=0)


def test_partition_rejects_empty_cluster(small_mask):
    labels = np.zeros(small_mask.ocean_count, dtype=np.int64)
    with pytest.raises(ArgumentError):
        Partition(small_mask, labels, 2)


INTEGER_GRID = Grid(n_lon=360, n_lat=179, lon0=0.5, lat0=-89.0, d_lon=1.0, d_lat=1.0)


def point_index(lat, lon):
    """Row-major index of the cell centered on integer ``lat`` and ``lon`` + 0.5."""
    return (int(round(lat)) + 89) * 360 + int(np.floor(lon))


def point_mask(lat, lon):
    ocean = np.zeros(INTEGER_GRID.shape, dtype=bool)
    ocean.flat[point_index(lat, lon)] = True
    return OceanMask(INTEGER_GRID, ocean)


@pytest.fixture(scope="module")
def globe_partition():
    return domain_partition(OceanMask.all_ocean(INTEGER_GRID))


def test_domain_partition_full_globe_has_four_regions():
    partition = domain_partition(OceanMask.all_ocean(Grid.regular(36, 18)))
    assert partition.k == 4
    assert partition.sizes.sum() == 36 * 18


@pytest.mark.parametrize("lat,lon,label", [
    (-45, 10.5, 2),
    (-45, 200.5, 2),
    (-30, 50.5, 2),
    (40, 320.5, 0),
    (30, 200.5, 1),
    (0, 180.5, 3),
    (10, 270.5, 3),
    (25, 270.5, 0),
    (-10, 90.5, 3),
])
def test_domain_partition_regions(globe_partition, lat, lon, label):
    assert globe_partition.labels[point_index(lat, lon)] == label


def test_domain_partition_compacts_empty_regions():
    partition = domain_partition(point_mask(-45, 10.5))
    assert partition.k == 1
    np.testing.assert_array_equal(partition.labels, [0])


def test_domain_boxes_round_trip_through_dict():
    boxes = DomainBoxes(southern_latitude=-40.0)
    assert DomainBoxes.from_dict(boxes.to_dict()) == boxes
