# Synthetic observation / climate-model suites with planted trends
"""
The observation stack is

    S(x, t) = offset(x) + trend(x) * (t - t0) + seasonal(x) * cos(2 pi (m + 1/2) / 12)
              + enso(x) * cos(2 pi (t - t_mid) / period) + noise

The seasonal term is phased on month centers and the oscillation is even about
the window center, so neither changes the OLS slope: a noiseless observation
stack returns the planted trend exactly. Models are biased, smoothed copies of
the planted trends scaled to half the variance, plus a small model-specific
pattern error; their projections carry the planted future trend when the suite
is informative.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from scipy import ndimage

from config import Config
from utils.helpers import PathLike, file_sha256, save_json_file
from .evalmetrics import ModelPair
from .exceptions import ArgumentError
from .file_formats import write_grd1
from .grid_core import Field, Grid, OceanMask, area_weights
from .trend import TimeSeriesStack

logger = logging.getLogger(__name__)

ENSO_PERIOD_YEARS = 4.0
MODEL_VARIANCE_FACTOR = 0.5


@dataclass
class SyntheticSuite:
    mask: OceanMask
    observation: TimeSeriesStack
    pairs: List[ModelPair]
    past_trend: np.ndarray = field(repr=False)
    future_trend: np.ndarray = field(repr=False)
    seasonal: np.ndarray = field(repr=False)
    train_window: tuple = (1993, 1998)
    predict_window: tuple = (1999, 2004)

    @property
    def model_names(self) -> List[str]:
        return [p.name for p in self.pairs]


def synthetic_mask(grid: Grid) -> OceanMask:
    """Ocean everywhere except the northernmost band and two rectangular continents."""
    lat = grid.lats[:, None]
    lon = grid.lons[None, :]
    land = (lat > 80.0) & np.ones_like(lon, dtype=bool)
    land |= (lon >= 20.0) & (lon < 50.0) & (lat >= -30.0) & (lat < 40.0)
    land |= (lon >= 240.0) & (lon < 260.0) & (lat >= 20.0) & (lat < 60.0)
    if land.all():
        land[:] = False
    return OceanMask(grid, ~land)


def smooth_pattern(mask: OceanMask, rng: np.random.Generator, n_terms: int = 6) -> np.ndarray:
    """Large-scale random pattern over ocean points, weighted RMS 1 and weighted mean 0."""
    lat = np.deg2rad(mask.point_lats)
    lon = np.deg2rad(mask.point_lons)
    values = np.zeros(mask.ocean_count)
    for _ in range(n_terms):
        zonal = rng.integers(0, 4)
        meridional = rng.integers(1, 4)
        amplitude = rng.normal()
        values += amplitude * np.cos(zonal * lon + rng.uniform(0, 2 * np.pi)) * np.cos(meridional * lat + rng.uniform(0, np.pi))
    w = area_weights(mask)
    values -= np.dot(w, values) / w.sum()
    rms = np.sqrt(np.dot(w, values ** 2) / w.sum())
    return values / rms if rms > 0 else values


def smooth_on_grid(mask: OceanMask, points: np.ndarray, width: int) -> np.ndarray:
    """Ocean-only box smoothing of ``width`` cells (longitude wraps)."""
    if width <= 1:
        return points.copy()
    grid_values = mask.scatter(points, fill=0.0)
    weight = mask.mask.astype(np.float64)
    num = ndimage.uniform_filter(grid_values, size=width, mode=("nearest", "wrap"))
    den = ndimage.uniform_filter(weight, size=width, mode=("nearest", "wrap"))
    return mask.gather(num / den)


def _stack(mask: OceanMask, start_year: int, months: int, trend: np.ndarray, offset: np.ndarray,
           seasonal: np.ndarray, enso: np.ndarray, noise: float, rng: np.random.Generator) -> TimeSeriesStack:
    m = np.arange(months, dtype=np.float64)
    t = start_year + (m + 0.5) / 12.0
    elapsed = t - start_year
    cycle = np.cos(2.0 * np.pi * (m + 0.5) / 12.0)
    oscillation = np.cos(2.0 * np.pi * (t - t.mean()) / ENSO_PERIOD_YEARS)
    values = (offset[:, None] + trend[:, None] * elapsed[None, :] + seasonal[:, None] * cycle[None, :]
              + enso[:, None] * oscillation[None, :])
    if noise > 0:
        values = values + noise * rng.standard_normal(values.shape)
    return TimeSeriesStack(mask, start_year, values, 1)


def make_suite(n_lon: int = Config.DESK_GRID[0], n_lat: int = Config.DESK_GRID[1], n_models: int = 6,
               months: int = 72, seed: int = Config.DEFAULT_SEED, start_year: int = Config.TRAIN_WINDOW[0],
               noise: float = 2.0, seasonal_amplitude: float = 30.0, enso_amplitude: float = 15.0,
               informative: bool = True, model_names: Optional[List[str]] = None) -> SyntheticSuite:
    if months % 12 or months < Config.MIN_TREND_MONTHS:
        raise ArgumentError(f"Months must be whole years and at least {Config.MIN_TREND_MONTHS}, got {months}")
    if n_models < 1:
        raise ArgumentError("Need at least one pseudo-model")
    rng = np.random.default_rng(seed)
    grid = Grid.regular(n_lon, n_lat)
    mask = synthetic_mask(grid)
    n = mask.ocean_count
    lat = mask.point_lats
    lon = np.deg2rad(mask.point_lons)

    global_rise = 3.0
    past = global_rise + smooth_pattern(mask, rng)
    change = smooth_pattern(mask, rng)
    future = global_rise + 0.5 + 0.6 * (past - global_rise) + 0.8 * change
    seasonal = seasonal_amplitude * (0.5 + np.abs(np.sin(np.deg2rad(lat))))
    enso = enso_amplitude * np.exp(-(lat / 15.0) ** 2) * np.cos(lon - np.pi)
    offset = 50.0 * rng.standard_normal(n)

    years = months // 12
    future_start = start_year + years
    observation = _stack(mask, start_year, months, past, offset, seasonal, enso, noise, rng)

    if model_names is None:
        model_names = (Config.MODEL_NAMES[:n_models] if n_models <= len(Config.MODEL_NAMES)
                       else [f"MODEL{j + 1}" for j in range(n_models)])
    amplitude = np.sqrt(MODEL_VARIANCE_FACTOR)
    pairs = []
    for j, name in enumerate(model_names):
        width = 1 if j % 2 == 0 else 3
        bias = rng.normal(0.0, 0.5)
        error = 0.15 * smooth_pattern(mask, rng)
        hind_trend = bias + amplitude * smooth_on_grid(mask, past, width) + error
        target = future if informative else past
        proj_trend = bias + amplitude * smooth_on_grid(mask, target, width) + error
        model_seasonal = seasonal * rng.uniform(0.8, 1.2)
        model_offset = offset + rng.normal(0.0, 5.0, n)
        hindcast = _stack(mask, start_year, months, hind_trend, model_offset, model_seasonal,
                          0.3 * enso, 0.25 * noise, rng)
        projection = _stack(mask, future_start, months, proj_trend, model_offset, model_seasonal,
                            0.3 * enso, 0.25 * noise, rng)
        pairs.append(ModelPair(name, hindcast, projection))

    logger.info("Synthetic suite: %dx%d grid, %d ocean points, %d models, %d months",
                n_lon, n_lat, n, len(pairs), months)
    return SyntheticSuite(mask, observation, pairs, past, future, seasonal,
                          (start_year, future_start - 1), (future_start, future_start + years - 1))


def desk_run_config(suite: SyntheticSuite, files: Dict[str, object], seed: int) -> dict:
    """Run configuration sized for quick desk-scale runs on a synthetic suite."""
    return {
        "grid": {"n_lon": suite.mask.grid.n_lon, "n_lat": suite.mask.grid.n_lat},
        "observation": files["observation"],
        "models": files["models"],
        "future_truth": files["future_truth"],
        "train_window": list(suite.train_window),
        "predict_window": list(suite.predict_window),
        "strategy": Config.DEFAULT_STRATEGY,
        "k": Config.DEFAULT_CLUSTERS,
        "sigma": Config.SIGMA_POLICY,
        "knn": None,
        "training": {"learning_rate": 3e-3, "epochs": 150, "batch_size": 64, "l2": Config.L2,
                     "dropout": Config.DROPOUT, "patience": 30, "validation_fraction": 0.1},
        "architectures": {"big": [64, 32, 16], "small": [32, 16], "big_fraction": Config.BIG_CLUSTER_FRACTION},
        "mc_passes": 50,
        "background_size": 40,
        "seed": seed,
        "threads": 1,
        "output_dir": "output",
        "sweep_ks": [2, 4, 8, 16],
    }


def gen_synth(out_dir: PathLike, n_lon: int = Config.DESK_GRID[0], n_lat: int = Config.DESK_GRID[1],
              n_models: int = 6, months: int = 72, seed: int = Config.DEFAULT_SEED, **options) -> Path:
    """Write a synthetic dataset directory (GRD1 stacks, truth fields, manifest, run config)."""
    suite = make_suite(n_lon, n_lat, n_models, months, seed, **options)
    out = Path(out_dir)
    observation = write_grd1(suite.observation, out / "observation.grd1")
    models = []
    for pair in suite.pairs:
        hind = write_grd1(pair.hindcast, out / "models" / f"{pair.name}_hindcast.grd1")
        proj = write_grd1(pair.projection, out / "models" / f"{pair.name}_projection.grd1")
        models.append({"name": pair.name, "hindcast": str(hind.relative_to(out)),
                       "projection": str(proj.relative_to(out))})
    past = write_grd1(Field.from_points(suite.mask, suite.past_trend), out / "truth" / "past_trend.grd1")
    future = write_grd1(Field.from_points(suite.mask, suite.future_trend), out / "truth" / "future_trend.grd1")

    files = {"observation": "observation.grd1", "models": models,
             "future_truth": str(future.relative_to(out))}
    save_json_file(out / "manifest.json", {
        "generator": {"n_lon": n_lon, "n_lat": n_lat, "n_models": n_models, "months": months,
                      "seed": seed, **options},
        "ocean_points": suite.mask.ocean_count,
        "train_window": suite.train_window,
        "predict_window": suite.predict_window,
        "model_variance_factor": MODEL_VARIANCE_FACTOR,
        "truth": {"past_trend": str(past.relative_to(out)), "future_trend": files["future_truth"]},
        "hashes": {str(p.relative_to(out)): file_sha256(p) for p in sorted(out.rglob("*.grd1"))},
    })
    config_path = save_json_file(out / "config.json", desk_run_config(suite, files, seed))
    logger.info("Synthetic dataset written to %s (observation %s)", out, observation.name)
    return config_path
