# End-to-end orchestration: run configuration, pipeline stages and artifacts
"""
Stages run lazily and are cached, so a subcommand only pays for what it needs:

    datasets -> trends -> partition -> regional -> training / future
             -> uncertainty -> importance -> loo_table

Normalization order is fixed: the area-weighted global mean is removed from
every monthly slice, trends are fitted, and each cluster then scales its own
trends to [0, 1].
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from config import Config
from utils.helpers import (PathLike, derive_seed, file_sha256, format_window, get_current_timestamp,
                           load_json_file, resolve_path, save_json_file, write_csv)
from .evalmetrics import (ModelPair, leave_one_out, model_spread, model_trends, persistence, rms_variability,
                          score, uncertainty_spread_overlap, weighted_pearson, weighted_rmse)
from .exceptions import ArgumentError, ConfigError, DataError, DegenerateInputError, PipelineStageError
from .explain import background_set, cluster_importance
from .file_formats import read_grd1, save_regional_model, write_grd1, write_partition_csv, write_partition_ppm, write_pgm
from .grid_core import Field, OceanMask, area_weights, shared_mask
from .neuralnet import ArchitecturePolicy, RegionalModel, TrainConfig
from .segmentation import DomainBoxes, Partition, domain_partition, spectral_cluster
from .trend import TrendMap, Window, deseasonalize, remove_global_mean_monthly, slice_window, trend_map
from .uncertainty import UncertaintyMap, regional_mc_dropout, uncertainty_rms

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["n_clusters", "training_rmse", "future_rms", "uncertainty_rms",
                 "correlation_with_past", "loo_correlation"]

RUN_ARTIFACTS = [
    "manifest.json",
    "partition.csv",
    "trends/observed_trend.grd1",
    "fields/training_prediction.grd1",
    "fields/future_prediction.grd1",
    "fields/mc_mean.grd1",
    "fields/mc_std.grd1",
    "fields/model_spread.grd1",
    "tables/training_scores.csv",
    "tables/cluster_scores.csv",
    "tables/future_scores.csv",
    "tables/shap_importance.csv",
    "tables/shap_points.csv",
    "heatmaps/partition.ppm",
    "heatmaps/observed_trend.pgm",
    "heatmaps/future_prediction.pgm",
    "heatmaps/mc_std.pgm",
    "heatmaps/model_spread.pgm",
    "models/partition.csv",
]


@dataclass(frozen=True)
class DatasetSource:
    name: str
    hindcast: Path
    projection: Path


def _window(value, name: str) -> Window:
    try:
        start, end = (int(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{name}' must be a [start_year, end_year] pair, got {value!r}") from exc
    if end < start:
        raise ConfigError(f"'{name}' ends before it starts: {value!r}")
    return start, end


def _existing(path: Path, what: str) -> Path:
    if not path.is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path


@dataclass(frozen=True)
class RunConfig:
    """Everything one run needs; paths are already resolved."""

    observation: Path
    models: Tuple[DatasetSource, ...]
    train_window: Window = Config.TRAIN_WINDOW
    predict_window: Window = Config.PREDICT_WINDOW
    grid: Optional[Tuple[int, int]] = None
    future_truth: Optional[Path] = None
    strategy: str = Config.DEFAULT_STRATEGY
    k: int = Config.DEFAULT_CLUSTERS
    sigma: object = Config.SIGMA_POLICY
    knn: Optional[int] = None
    boxes: DomainBoxes = DomainBoxes()
    training: TrainConfig = TrainConfig()
    architectures: ArchitecturePolicy = ArchitecturePolicy()
    candidates: Optional[Tuple[Tuple[int, ...], ...]] = None
    kfold: int = Config.KFOLD
    mc_passes: int = Config.MC_PASSES
    background_size: int = Config.BACKGROUND_SIZE
    shap_method: str = "kernel"
    shap_samples: Optional[int] = None
    seed: int = Config.DEFAULT_SEED
    threads: int = Config.DEFAULT_THREADS
    output_dir: Path = Path(Config.DEFAULT_OUTPUT_DIR)
    sweep_ks: Tuple[int, ...] = tuple(Config.SWEEP_CLUSTERS)

    def __post_init__(self):
        if self.strategy not in Config.STRATEGIES:
            raise ConfigError(f"Unknown strategy '{self.strategy}', expected one of {Config.STRATEGIES}")
        if self.k < 1:
            raise ConfigError(f"Number of clusters must be positive, got {self.k}")
        if not self.models:
            raise ConfigError("At least one climate model is required")
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ConfigError(f"Model names must be unique, got {names}")
        if self.threads < 1 or self.mc_passes < 1 or self.background_size < 1:
            raise ConfigError("threads, mc_passes and background_size must be positive")
        if self.shap_method not in ("kernel", "exact"):
            raise ConfigError(f"Unknown SHAP method '{self.shap_method}'")

    @classmethod
    def from_file(cls, path: PathLike) -> "RunConfig":
        path = Path(path)
        return cls.from_dict(load_json_file(path), path.parent)

    @classmethod
    def from_dict(cls, data: dict, base_dir: PathLike = ".") -> "RunConfig":
        try:
            observation = _existing(resolve_path(data["observation"], base_dir), "Observation file")
            models = tuple(
                DatasetSource(str(m["name"]),
                              _existing(resolve_path(m["hindcast"], base_dir), f"Hindcast of {m['name']}"),
                              _existing(resolve_path(m["projection"], base_dir), f"Projection of {m['name']}"))
                for m in data["models"]
            )
        except KeyError as exc:
            raise ConfigError(f"Missing config key {exc}") from exc
        except TypeError as exc:
            raise ConfigError(f"Malformed model list: {exc}") from exc

        sigma = data.get("sigma", Config.SIGMA_POLICY)
        if sigma != "median":
            try:
                sigma = float(sigma)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"sigma must be 'median' or a positive number, got {sigma!r}") from exc
            if sigma <= 0:
                raise ConfigError(f"sigma must be positive, got {sigma}")

        grid = data.get("grid")
        arch = data.get("architectures", {})
        candidates = data.get("candidates")
        truth = data.get("future_truth")
        try:
            training = TrainConfig.from_dict(data.get("training", {}))
            architectures = ArchitecturePolicy(
                tuple(arch.get("big", Config.BIG_HIDDEN_SIZES)),
                tuple(arch.get("small", Config.SMALL_HIDDEN_SIZES)),
                float(arch.get("big_fraction", Config.BIG_CLUSTER_FRACTION)),
            )
        except (ArgumentError, TypeError) as exc:
            raise ConfigError(f"Invalid training settings: {exc}") from exc

        return cls(
            observation=observation,
            models=models,
            train_window=_window(data.get("train_window", Config.TRAIN_WINDOW), "train_window"),
            predict_window=_window(data.get("predict_window", Config.PREDICT_WINDOW), "predict_window"),
            grid=(int(grid["n_lon"]), int(grid["n_lat"])) if grid else None,
            future_truth=_existing(resolve_path(truth, base_dir), "Future truth file") if truth else None,
            strategy=data.get("strategy", Config.DEFAULT_STRATEGY),
            k=int(data.get("k", Config.DEFAULT_CLUSTERS)),
            sigma=sigma,
            knn=data.get("knn"),
            boxes=DomainBoxes.from_dict(data.get("boxes", {})),
            training=training,
            architectures=architectures,
            candidates=tuple(tuple(int(h) for h in c) for c in candidates) if candidates else None,
            kfold=int(data.get("kfold", Config.KFOLD)),
            mc_passes=int(data.get("mc_passes", Config.MC_PASSES)),
            background_size=int(data.get("background_size", Config.BACKGROUND_SIZE)),
            shap_method=data.get("shap_method", "kernel"),
            shap_samples=data.get("shap_samples"),
            seed=int(data.get("seed", Config.DEFAULT_SEED)),
            threads=int(data.get("threads", Config.DEFAULT_THREADS)),
            output_dir=resolve_path(data.get("output_dir", Config.DEFAULT_OUTPUT_DIR), base_dir),
            sweep_ks=tuple(int(k) for k in data.get("sweep_ks", Config.SWEEP_CLUSTERS)),
        )

    def with_overrides(self, **overrides) -> "RunConfig":
        """Replace the fields given with a non-None value (command-line flags)."""
        given = {k: v for k, v in overrides.items() if v is not None}
        if "output_dir" in given:
            given["output_dir"] = Path(given["output_dir"])
        return replace(self, **given)

    @property
    def train_config(self) -> TrainConfig:
        return replace(self.training, seed=self.seed)

    @property
    def model_names(self) -> List[str]:
        return [m.name for m in self.models]

    def to_dict(self) -> dict:
        return {
            "observation": str(self.observation),
            "models": [{"name": m.name, "hindcast": str(m.hindcast), "projection": str(m.projection)}
                       for m in self.models],
            "train_window": list(self.train_window),
            "predict_window": list(self.predict_window),
            "grid": list(self.grid) if self.grid else None,
            "future_truth": str(self.future_truth) if self.future_truth else None,
            "strategy": self.strategy,
            "k": self.k,
            "seed": self.seed,
            "threads": self.threads,
            "output_dir": str(self.output_dir),
            "sweep_ks": list(self.sweep_ks),
        }


@dataclass(eq=False)
class DatasetBundle:
    """Stacks restricted to the shared mask and cut to their windows."""

    mask: OceanMask
    weights: np.ndarray = field(repr=False)
    observation: object = field(repr=False)
    pairs: List[ModelPair] = field(repr=False)
    hashes: Dict[str, str] = field(default_factory=dict)


@dataclass(eq=False)
class TrendBundle:
    observed: TrendMap
    hindcast: np.ndarray = field(repr=False)
    projection: np.ndarray = field(repr=False)
    future_truth: Optional[TrendMap] = None


@contextmanager
def stage(name: str):
    """Label any failure inside the block with the pipeline stage it came from."""
    logger.info("Stage %s: start", name)
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as exc:
        logger.error("Stage %s failed: %s", name, exc)
        raise PipelineStageError(name, exc) from exc
    logger.info("Stage %s: done", name)


class TrendPipeline:
    def __init__(self, config: RunConfig):
        self.config = config

    def variant(self, **overrides) -> "TrendPipeline":
        """Same data, different settings; loaded datasets and trends are shared."""
        other = TrendPipeline(self.config.with_overrides(**overrides))
        for name in ("datasets", "trends"):
            if name in self.__dict__:
                other.__dict__[name] = self.__dict__[name]
        return other

    @cached_property
    def datasets(self) -> DatasetBundle:
        cfg = self.config
        with stage("load"):
            observation = read_grd1(cfg.observation, as_stack=True)
            hindcasts = [read_grd1(m.hindcast, as_stack=True) for m in cfg.models]
            projections = [read_grd1(m.projection, as_stack=True) for m in cfg.models]
            stacks = [observation, *hindcasts, *projections]
            grid = observation.mask.grid
            if cfg.grid and (grid.n_lon, grid.n_lat) != cfg.grid:
                raise DataError(f"Observation grid {grid.n_lon}x{grid.n_lat} differs from configured {cfg.grid}")
            mask = shared_mask([s.mask for s in stacks], grid)
            logger.info("Shared ocean mask: %d points (observation has %d)",
                        mask.ocean_count, observation.mask.ocean_count)

            observation = slice_window(observation.restrict(mask), cfg.train_window)
            pairs = [ModelPair(m.name,
                               slice_window(h.restrict(mask), cfg.train_window),
                               slice_window(p.restrict(mask), cfg.predict_window))
                     for m, h, p in zip(cfg.models, hindcasts, projections)]
            paths = [cfg.observation] + [p for m in cfg.models for p in (m.hindcast, m.projection)]
            if cfg.future_truth:
                paths.append(cfg.future_truth)
            hashes = {str(p): file_sha256(p) for p in paths}
        return DatasetBundle(mask, area_weights(mask), observation, pairs, hashes)

    @cached_property
    def trends(self) -> TrendBundle:
        cfg = self.config
        data = self.datasets
        with stage("trends"):
            w = data.weights
            observed = trend_map(remove_global_mean_monthly(data.observation, w), cfg.train_window)
            hind, proj = model_trends(data.pairs, cfg.train_window, cfg.predict_window, w)
            truth = None
            if cfg.future_truth:
                points = read_grd1(cfg.future_truth, as_stack=False).to_points(data.mask)
                truth = TrendMap(data.mask, points - np.dot(w, points) / w.sum(), cfg.predict_window)
            logger.info("Observed trend RMS %.4g mm/yr over %s", rms_variability(observed, w),
                        format_window(cfg.train_window))
        return TrendBundle(observed, hind, proj, truth)

    @cached_property
    def partition(self) -> Partition:
        cfg = self.config
        data = self.datasets
        with stage("segmentation"):
            if cfg.strategy == "none":
                partition = Partition.single(data.mask)
            elif cfg.strategy == "domain":
                partition = domain_partition(data.mask, cfg.boxes)
            else:
                anomalies = deseasonalize(remove_global_mean_monthly(data.observation, data.weights))
                partition = spectral_cluster(anomalies.values, cfg.k, derive_seed(cfg.seed, "segmentation"),
                                             mask=data.mask, sigma=cfg.sigma, knn=cfg.knn)
            logger.info("Partition (%s): %d clusters, sizes %s", cfg.strategy, partition.k,
                        partition.sizes.tolist())
        return partition

    @cached_property
    def regional(self) -> RegionalModel:
        cfg = self.config
        trends = self.trends
        partition = self.partition
        with stage("training"):
            return RegionalModel.fit(trends.hindcast, trends.observed.slope, self.datasets.weights, partition,
                                     cfg.train_config, cfg.architectures, candidates=cfg.candidates,
                                     kfold=cfg.kfold, threads=cfg.threads)

    @cached_property
    def training_prediction(self) -> TrendMap:
        with stage("training-scores"):
            return self.trends.observed.with_slope(self.regional.predict(self.trends.hindcast))

    @cached_property
    def future_prediction(self) -> TrendMap:
        with stage("prediction"):
            return TrendMap(self.datasets.mask, self.regional.predict(self.trends.projection),
                            self.config.predict_window)

    def training_scores(self) -> pd.DataFrame:
        w = self.datasets.weights
        report = score(self.training_prediction, self.trends.observed, w, "training",
                       strategy=self.config.strategy, n_clusters=self.partition.k)
        return pd.DataFrame([report.as_row()])

    def cluster_scores(self) -> pd.DataFrame:
        w = self.datasets.weights
        pred, obs = self.training_prediction.slope, self.trends.observed.slope
        rows = []
        for c, model in self.regional.models.items():
            idx = self.partition.members(c)
            try:
                corr = weighted_pearson(pred[idx], obs[idx], w[idx])
            except DegenerateInputError:
                corr = float("nan")
            history = model.history
            rows.append({"cluster": c, "n_points": idx.size,
                         "hidden_sizes": "-".join(str(h) for h in model.mlp.layer_sizes[1:-1]),
                         "epochs_run": history.epochs_run if history else 0,
                         "best_epoch": history.best_epoch if history else 0,
                         "rmse": weighted_rmse(pred[idx], obs[idx], w[idx]), "correlation": corr})
        return pd.DataFrame(rows)

    def future_scores(self) -> pd.DataFrame:
        w = self.datasets.weights
        observed = self.trends.observed
        candidates = {"ml": self.future_prediction,
                      "persistence": persistence(observed, self.config.predict_window)}
        rows = []
        for method, prediction in candidates.items():
            row = {"method": method, "rms_variability": rms_variability(prediction, w),
                   "correlation_with_past": weighted_pearson(prediction.slope, observed.slope, w)
                   if method == "ml" else 1.0}
            truth = self.trends.future_truth
            if truth is not None:
                row["rmse_vs_truth"] = weighted_rmse(prediction, truth, w)
                row["correlation_vs_truth"] = weighted_pearson(prediction, truth, w)
            rows.append(row)
        return pd.DataFrame(rows)

    @cached_property
    def uncertainty(self) -> UncertaintyMap:
        with stage("uncertainty"):
            return regional_mc_dropout(self.regional, self.trends.projection, self.config.mc_passes,
                                       derive_seed(self.config.seed, "mc-dropout"), mask=self.datasets.mask)

    @cached_property
    def spread(self) -> np.ndarray:
        mask = self.datasets.mask
        proj = self.trends.projection
        return model_spread([TrendMap(mask, proj[:, j], self.config.predict_window) for j in range(proj.shape[1])])

    def uncertainty_summary(self) -> dict:
        w = self.datasets.weights
        try:
            overlap = uncertainty_spread_overlap(self.uncertainty.std, self.spread, w)
        except DegenerateInputError:
            overlap = None
        return {"uncertainty_rms": uncertainty_rms(self.uncertainty, w),
                "model_spread_rms": float(np.sqrt(np.dot(w, self.spread ** 2) / w.sum())),
                "uncertainty_spread_correlation": overlap,
                "mc_passes": self.uncertainty.passes}

    @cached_property
    def importance(self) -> Tuple[pd.DataFrame, pd.DataFrame]:
        cfg = self.config
        regional = self.regional
        with stage("explain"):
            backgrounds = {}
            for c, model in regional.models.items():
                idx = self.partition.members(c)
                scaled = model.scaler.transform_x(self.trends.hindcast[idx])
                backgrounds[c] = background_set(scaled, cfg.background_size, derive_seed(cfg.seed, "background", c))
            return cluster_importance(regional, self.trends.projection, backgrounds, cfg.model_names,
                                      method=cfg.shap_method, n_samples=cfg.shap_samples,
                                      seed=derive_seed(cfg.seed, "shap"))

    @cached_property
    def loo_table(self) -> pd.DataFrame:
        cfg = self.config
        with stage("leave-one-out"):
            return leave_one_out(self.datasets.pairs, self.partition, cfg.train_config, cfg.train_window,
                                 cfg.predict_window, cfg.architectures, threads=cfg.threads,
                                 trends=(self.trends.hindcast, self.trends.projection))

    # artifact writers; each returns the paths it wrote

    def _field(self, points: np.ndarray) -> Field:
        return Field.from_points(self.datasets.mask, points)

    def write_trends(self, out: Path) -> List[Path]:
        trends = self.trends
        paths = [write_grd1(trends.observed.to_field(), out / "trends" / "observed_trend.grd1"),
                 write_pgm(trends.observed.to_field(), out / "heatmaps" / "observed_trend.pgm")]
        for j, name in enumerate(self.config.model_names):
            paths.append(write_grd1(self._field(trends.hindcast[:, j]), out / "trends" / f"{name}_hindcast_trend.grd1"))
            paths.append(write_grd1(self._field(trends.projection[:, j]), out / "trends" / f"{name}_projection_trend.grd1"))
        return paths

    def write_partition(self, out: Path) -> List[Path]:
        return [write_partition_csv(self.partition, out / "partition.csv"),
                write_partition_ppm(self.partition, out / "heatmaps" / "partition.ppm")]

    def write_training(self, out: Path) -> List[Path]:
        return [save_regional_model(self.regional, out / "models") / "partition.csv",
                write_grd1(self.training_prediction.to_field(), out / "fields" / "training_prediction.grd1"),
                write_csv(out / "tables" / "training_scores.csv", self.training_scores()),
                write_csv(out / "tables" / "cluster_scores.csv", self.cluster_scores())]

    def write_future(self, out: Path) -> List[Path]:
        field_ = self.future_prediction.to_field()
        return [write_grd1(field_, out / "fields" / "future_prediction.grd1"),
                write_pgm(field_, out / "heatmaps" / "future_prediction.pgm"),
                write_csv(out / "tables" / "future_scores.csv", self.future_scores())]

    def write_uncertainty(self, out: Path) -> List[Path]:
        u = self.uncertainty
        spread = self._field(self.spread)
        return [write_grd1(u.mean_field, out / "fields" / "mc_mean.grd1"),
                write_grd1(u.std_field, out / "fields" / "mc_std.grd1"),
                write_grd1(spread, out / "fields" / "model_spread.grd1"),
                write_pgm(u.std_field, out / "heatmaps" / "mc_std.pgm"),
                write_pgm(spread, out / "heatmaps" / "model_spread.pgm")]

    def write_importance(self, out: Path) -> List[Path]:
        ranking, points = self.importance
        return [write_csv(out / "tables" / "shap_importance.csv", ranking),
                write_csv(out / "tables" / "shap_points.csv", points)]

    def write_leave_one_out(self, out: Path) -> List[Path]:
        return [write_csv(out / "tables" / "leave_one_out.csv", self.loo_table)]

    def design_parameters(self) -> dict:
        cfg = self.config
        t = cfg.train_config
        return {
            "normalization_order": ["remove area-weighted global mean per month", "fit OLS trends",
                                    "min-max scale per cluster"],
            "area_weights": "cos(latitude)",
            "segmentation": {"strategy": cfg.strategy, "k": cfg.k,
                             "sigma": cfg.sigma, "knn": cfg.knn, "features": "deseasonalized observed anomalies",
                             "kmeans_max_iter": Config.KMEANS_MAX_ITER, "kmeans_tol": Config.KMEANS_TOL,
                             "kmeans_max_repairs": Config.KMEANS_MAX_REPAIRS, "boxes": cfg.boxes.to_dict()},
            "optimizer": {"name": "adam", "learning_rate": t.learning_rate, "beta1": t.beta1, "beta2": t.beta2,
                          "epsilon": t.epsilon, "batch_size": t.batch_size, "epochs": t.epochs,
                          "patience": t.patience, "validation_fraction": t.validation_fraction},
            "regularization": {"l2": t.l2, "dropout": t.dropout, "dropout_layer_index": Config.DROPOUT_LAYER_INDEX},
            "architectures": {"big": list(cfg.architectures.big_hidden_sizes),
                              "small": list(cfg.architectures.small_hidden_sizes),
                              "big_fraction": cfg.architectures.big_fraction,
                              "candidates": [list(c) for c in cfg.candidates] if cfg.candidates else None,
                              "kfold": cfg.kfold},
            "uncertainty": {"mc_passes": cfg.mc_passes, "std": "population"},
            "explain": {"method": cfg.shap_method, "samples": cfg.shap_samples,
                        "background_size": cfg.background_size, "inputs": "scaled projection trends"},
            "correlation": "weighted-centered pearson",
        }

    def write_manifest(self, out: Path, results: dict, artifacts: Sequence[Path]) -> Path:
        return save_json_file(out / "manifest.json", {
            "created": get_current_timestamp(),
            "config": self.config.to_dict(),
            "design": self.design_parameters(),
            "datasets": self.datasets.hashes,
            "ocean_points": self.datasets.mask.ocean_count,
            "results": results,
            "artifacts": sorted(str(Path(p).relative_to(out)) for p in artifacts),
        })

    def run(self, out: Optional[PathLike] = None, include_leave_one_out: bool = False) -> dict:
        """Every stage in order; writes all artifacts and returns the summary."""
        out = Path(out or self.config.output_dir)
        artifacts: List[Path] = []
        artifacts += self.write_trends(out)
        artifacts += self.write_partition(out)
        artifacts += self.write_training(out)
        artifacts += self.write_future(out)
        artifacts += self.write_uncertainty(out)
        artifacts += self.write_importance(out)

        training = self.training_scores().iloc[0]
        future = self.future_scores().set_index("method")
        results = {
            "strategy": self.config.strategy,
            "n_clusters": self.partition.k,
            "cluster_sizes": self.partition.sizes.tolist(),
            "training_rmse": float(training["rmse"]),
            "training_correlation": float(training["correlation"]),
            "future_rms": float(future.loc["ml", "rms_variability"]),
            "correlation_with_past": float(future.loc["ml", "correlation_with_past"]),
            **self.uncertainty_summary(),
        }
        if "rmse_vs_truth" in future.columns:
            results["rmse_vs_truth"] = {m: float(future.loc[m, "rmse_vs_truth"]) for m in future.index}
        if include_leave_one_out:
            artifacts += self.write_leave_one_out(out)
            loo = self.loo_table
            results["loo_correlation"] = float(
                loo.loc[(loo["metric"] == "correlation") & (loo["method"] == "ml"), "average"].iloc[0])
        artifacts.append(self.write_manifest(out, results, artifacts))
        logger.info("Run finished: training RMSE %.4g, future RMS %.4g, uncertainty RMS %.4g -> %s",
                    results["training_rmse"], results["future_rms"], results["uncertainty_rms"], out)
        return results


def cmd_run(config: RunConfig, out: Optional[PathLike] = None, include_leave_one_out: bool = False) -> dict:
    return TrendPipeline(config).run(out, include_leave_one_out)


def training_rmse_trend(table: pd.DataFrame) -> float:
    """Spearman rank correlation of cluster count against training RMSE over a sweep table."""
    return float(spearmanr(table["n_clusters"], table["training_rmse"]).correlation)


def cmd_sweep(config: RunConfig, ks: Optional[Sequence[int]] = None,
              out: Optional[PathLike] = None) -> pd.DataFrame:
    """Spectral clustering with each k: the five summary columns per row."""
    ks = list(ks or config.sweep_ks)
    base = TrendPipeline(config)
    w = base.datasets.weights
    rows = []
    for k in ks:
        logger.info("Sweep: k=%d", k)
        pipeline = base.variant(strategy="spectral", k=k)
        loo = pipeline.loo_table
        rows.append({
            "n_clusters": k,
            "training_rmse": weighted_rmse(pipeline.training_prediction, pipeline.trends.observed, w),
            "future_rms": rms_variability(pipeline.future_prediction, w),
            "uncertainty_rms": uncertainty_rms(pipeline.uncertainty, w),
            "correlation_with_past": weighted_pearson(pipeline.future_prediction, pipeline.trends.observed, w),
            "loo_correlation": float(
                loo.loc[(loo["metric"] == "correlation") & (loo["method"] == "ml"), "average"].iloc[0]),
        })
    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    if len(ks) > 2:
        logger.info("Sweep: Spearman(k, training RMSE) = %.3f", training_rmse_trend(table))
    if out is not None:
        write_csv(Path(out) / "tables" / "sweep.csv", table)
    return table
