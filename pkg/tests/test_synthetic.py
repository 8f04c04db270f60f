import numpy as np
import pytest

from modules.exceptions import ArgumentError
from modules.file_formats import read_grd1
from modules.grid_core import Grid, area_weights
from modules.synthetic import gen_synth, make_suite, smooth_on_grid, smooth_pattern, synthetic_mask
from modules.trend import deseasonalize, trend_map
from utils.helpers import file_sha256, load_json_file


def quiet_suite(**options):
    return make_suite(n_lon=12, n_lat=6, n_models=3, months=48, seed=5, noise=0.0, **options)


def weighted_rms_anomaly(values, w):
    anomaly = values - np.dot(w, values) / w.sum()
    return np.sqrt(np.dot(w, anomaly ** 2) / w.sum())


def test_noiseless_observation_returns_planted_trend():
    suite = quiet_suite()
    np.testing.assert_allclose(trend_map(suite.observation).slope, suite.past_trend, atol=1e-9)


def test_windows_follow_the_record_length():
    suite = quiet_suite()
    assert suite.train_window == (1993, 1996)
    assert suite.predict_window == (1997, 2000)
    assert suite.pairs[0].projection.start_year == 1997


def test_models_vary_less_than_the_observation():
    suite = quiet_suite()
    w = area_weights(suite.mask)
    observed = weighted_rms_anomaly(suite.past_trend, w)
    assert observed == pytest.approx(1.0)
    for pair in suite.pairs:
        assert weighted_rms_anomaly(trend_map(pair.hindcast).slope, w) < observed


def test_deseasonalize_strips_the_seasonal_cycle():
    seasonal = quiet_suite()
    flat = quiet_suite(seasonal_amplitude=0.0)
    np.testing.assert_allclose(deseasonalize(seasonal.observation).values,
                               deseasonalize(flat.observation).values, atol=1e-9)


def test_uninformative_projection_repeats_the_past():
    suite = quiet_suite(informative=False)
    for pair in suite.pairs:
        np.testing.assert_allclose(trend_map(pair.projection).slope, trend_map(pair.hindcast).slope, atol=1e-9)


def test_suite_is_seeded():
    a, b = quiet_suite(), quiet_suite()
    np.testing.assert_array_equal(a.observation.values, b.observation.values)
    np.testing.assert_array_equal(a.pairs[2].projection.values, b.pairs[2].projection.values)


def test_synthetic_mask_continents():
    mask = synthetic_mask(Grid.regular(36, 18))
    assert not mask.mask[-1].any()
    lat_index, lon_index = 9, 3
    assert mask.grid.lats[lat_index] == 5.0 and mask.grid.lons[lon_index] == 35.0
    assert not mask.mask[lat_index, lon_index]
    assert mask.mask[0, 0]


def test_smooth_pattern_is_normalized(rng):
    mask = synthetic_mask(Grid.regular(24, 12))
    w = area_weights(mask)
    values = smooth_pattern(mask, rng)
    assert np.dot(w, values) / w.sum() == pytest.approx(0.0, abs=1e-12)
    assert weighted_rms_anomaly(values, w) == pytest.approx(1.0)


def test_smooth_on_grid_keeps_constants(rng):
    mask = synthetic_mask(Grid.regular(24, 12))
    np.testing.assert_allclose(smooth_on_grid(mask, np.full(mask.ocean_count, 2.5), 3), 2.5)
    points = rng.normal(size=mask.ocean_count)
    np.testing.assert_array_equal(smooth_on_grid(mask, points, 1), points)


def test_make_suite_rejects_partial_years():
    with pytest.raises(ArgumentError):
        make_suite(months=30)


def test_gen_synth_writes_a_complete_dataset(tmp_path):
    config_path = gen_synth(tmp_path / "synthetic", n_lon=12, n_lat=6, n_models=3, months=48, seed=5)
    root = config_path.parent
    config = load_json_file(config_path)
    assert len(config["models"]) == 3
    assert config["train_window"] == [1993, 1996]
    assert (root / config["future_truth"]).exists()
    manifest = load_json_file(root / "manifest.json")
    for name, digest in manifest["hashes"].items():
        assert file_sha256(root / name) == digest
    observation = read_grd1(root / "observation.grd1")
    np.testing.assert_array_equal(observation.values, make_suite(12, 6, 3, 48, 5).observation.values)
