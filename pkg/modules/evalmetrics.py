# Latitude-weighted scores, persistence baseline and leave-one-out model evaluation
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from utils.helpers import derive_seed
from .exceptions import ArgumentError, DegenerateInputError
from .grid_core import area_weights
from .neuralnet import ArchitecturePolicy, RegionalModel, TrainConfig
from .segmentation import Partition
from .trend import TimeSeriesStack, TrendMap, Window, remove_global_mean_monthly, trend_map

logger = logging.getLogger(__name__)

Values = Union[np.ndarray, TrendMap]


@dataclass
class ScoreReport:
    rmse: float
    correlation: float
    rms_variability: float
    label: str = ""
    metadata: Dict[str, object] = field(default_factory=dict)

    def as_row(self) -> dict:
        return {"label": self.label, "rmse": self.rmse, "correlation": self.correlation,
                "rms_variability": self.rms_variability, **self.metadata}


def _pair(a: Values, b: Values, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(a, TrendMap) and isinstance(b, TrendMap) and not a.mask.same_as(b.mask):
        raise ArgumentError("Fields are defined on different ocean masks")
    a = a.slope if isinstance(a, TrendMap) else np.asarray(a, dtype=np.float64)
    b = b.slope if isinstance(b, TrendMap) else np.asarray(b, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if a.shape != b.shape or a.shape != w.shape or a.ndim != 1:
        raise ArgumentError(f"Mismatched point sets: {a.shape}, {b.shape}, weights {w.shape}")
    return a, b, w


def weighted_rmse(a: Values, b: Values, w: np.ndarray) -> float:
    a, b, w = _pair(a, b, w)
    d = a - b
    return float(np.sqrt(np.dot(w, d * d) / w.sum()))


def weighted_pearson(a: Values, b: Values, w: np.ndarray) -> float:
    """Weighted-centered Pearson correlation."""
    a, b, w = _pair(a, b, w)
    total = w.sum()
    da = a - np.dot(w, a) / total
    db = b - np.dot(w, b) / total
    var_a = np.dot(w, da * da)
    var_b = np.dot(w, db * db)
    if var_a <= 0 or var_b <= 0:
        raise DegenerateInputError("Correlation is undefined for a constant field")
    r = np.dot(w, da * db) / np.sqrt(var_a * var_b)
    return float(np.clip(r, -1.0, 1.0))


def rms_variability(a: Values, w: np.ndarray) -> float:
    a, _, w = _pair(a, a, w)
    return float(np.sqrt(np.dot(w, a * a) / w.sum()))


def score(prediction: Values, truth: Values, w: np.ndarray, label: str = "", **metadata) -> ScoreReport:
    return ScoreReport(weighted_rmse(prediction, truth, w), weighted_pearson(prediction, truth, w),
                       rms_variability(prediction, w), label, dict(metadata))


def persistence(past: TrendMap, future_window: Window = None) -> TrendMap:
    """The past trend map offered unchanged as the forecast of a later window."""
    return TrendMap(past.mask, past.slope.copy(), future_window or past.window)


def model_spread(trends: Sequence[TrendMap]) -> np.ndarray:
    """Per-point population standard deviation across model trend maps."""
    if len(trends) < 2:
        raise ArgumentError("Need at least two trend maps to measure disagreement")
    return np.std(np.stack([t.slope for t in trends]), axis=0)


def uncertainty_spread_overlap(std: np.ndarray, spread: np.ndarray, w: np.ndarray) -> float:
    """Weighted correlation between prediction uncertainty and model disagreement."""
    return weighted_pearson(std, spread, w)


@dataclass(frozen=True, eq=False)
class ModelPair:
    """One climate model's hindcast (training window) and projection (future window) stacks."""

    name: str
    hindcast: TimeSeriesStack
    projection: TimeSeriesStack


def model_trends(pairs: Sequence[ModelPair], train_window: Window, predict_window: Window,
                 w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(points, models) matrices of global-mean-removed hindcast and projection trends."""
    hind = np.column_stack([trend_map(remove_global_mean_monthly(p.hindcast, w), train_window).slope
                            for p in pairs])
    proj = np.column_stack([trend_map(remove_global_mean_monthly(p.projection, w), predict_window).slope
                            for p in pairs])
    return hind, proj


def leave_one_out(pairs: Sequence[ModelPair], partition: Partition, cfg: TrainConfig,
                  train_window: Window, predict_window: Window,
                  architectures: ArchitecturePolicy = ArchitecturePolicy(), threads: int = 1,
                  trends: Tuple[np.ndarray, np.ndarray] = None) -> pd.DataFrame:
    """Predict each model's projection from the others, trained on its hindcast.

    Returns a table with one row per (metric, method) and one column per
    held-out model plus the average.
    """
    if len(pairs) < 3:
        raise ArgumentError(f"Leave-one-out needs at least 3 datasets (2 features after holdout), got {len(pairs)}")
    mask = partition.mask or pairs[0].hindcast.mask
    w = area_weights(mask)
    hind, proj = trends if trends is not None else model_trends(pairs, train_window, predict_window, w)
    names = [p.name for p in pairs]

    def evaluate(d: int) -> dict:
        others = [j for j in range(len(pairs)) if j != d]
        fold_cfg = replace(cfg, seed=derive_seed(cfg.seed, "leave-one-out", d))
        logger.info("Leave-one-out: holding out %s (seed %d)", names[d], fold_cfg.seed)
        regional = RegionalModel.fit(hind[:, others], hind[:, d], w, partition, fold_cfg, architectures)
        prediction = regional.predict(proj[:, others])
        return {
            ("rmse", "ml"): weighted_rmse(prediction, proj[:, d], w),
            ("correlation", "ml"): weighted_pearson(prediction, proj[:, d], w),
            ("rmse", "persistence"): weighted_rmse(hind[:, d], proj[:, d], w),
            ("correlation", "persistence"): _safe_pearson(hind[:, d], proj[:, d], w),
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate, range(len(pairs))))
    else:
        results = [evaluate(d) for d in range(len(pairs))]

    rows: List[dict] = []
    for metric, method in [("correlation", "ml"), ("correlation", "persistence"),
                           ("rmse", "ml"), ("rmse", "persistence")]:
        values = [r[(metric, method)] for r in results]
        row = {"metric": metric, "method": method}
        row.update(dict(zip(names, values)))
        row["average"] = float(np.mean(values))
        rows.append(row)
    return pd.DataFrame(rows, columns=["metric", "method", *names, "average"])


def _safe_pearson(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> float:
    """Identical maps correlate perfectly even when both are constant."""
    if np.array_equal(a, b):
        return 1.0
    return weighted_pearson(a, b, w)
