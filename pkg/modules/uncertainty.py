# Monte Carlo dropout predictive mean and spread
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from config import Config
from .exceptions import ArgumentError
from .grid_core import Field, OceanMask
from .neuralnet import ClusterModel, RegionalModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class UncertaintyMap:
    mask: Optional[OceanMask]
    mean: np.ndarray = field(repr=False)
    std: np.ndarray = field(repr=False)
    passes: int = 1

    def __post_init__(self):
        if self.mean.shape != self.std.shape:
            raise ArgumentError("Mean and std must cover the same points")
        if np.any(self.std < 0):
            raise ArgumentError("Standard deviation must be non-negative")

    @property
    def mean_field(self) -> Field:
        return Field.from_points(self.mask, self.mean)

    @property
    def std_field(self) -> Field:
        return Field.from_points(self.mask, self.std)


def point_generator(seed: int, point_id: int) -> np.random.Generator:
    """Independent random stream for one ocean point, whatever the iteration order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(point_id),)))


def mc_dropout_predict(model: ClusterModel, x_raw: np.ndarray, passes: int = Config.MC_PASSES,
                       seed: int = Config.DEFAULT_SEED, point_ids: Optional[np.ndarray] = None,
                       mask: Optional[OceanMask] = None) -> UncertaintyMap:
    """T dropout-mode passes per point, unscaled; population mean and std."""
    if passes < 1:
        raise ArgumentError(f"Need at least one pass, got {passes}")
    x = model.scaler.transform_x(np.asarray(x_raw, dtype=np.float64))
    n = x.shape[0]
    point_ids = np.arange(n) if point_ids is None else np.asarray(point_ids)
    mlp = model.mlp

    if mlp.dropout_rate == 0.0:
        mean = model.scaler.inverse_y(mlp.predict(x))
        return UncertaintyMap(mask, mean, np.zeros(n), passes)

    mean = np.empty(n)
    std = np.empty(n)
    for i in range(n):
        rng = point_generator(seed, point_ids[i])
        dropout_mask = mlp.draw_dropout_mask(rng, passes)
        samples = model.scaler.inverse_y(mlp.predict(np.repeat(x[i:i + 1], passes, axis=0), dropout_mask))
        mean[i] = samples.mean()
        std[i] = samples.std()
    return UncertaintyMap(mask, mean, std, passes)


def regional_mc_dropout(regional: RegionalModel, x_raw: np.ndarray, passes: int = Config.MC_PASSES,
                        seed: int = Config.DEFAULT_SEED, mask: Optional[OceanMask] = None) -> UncertaintyMap:
    """MC-dropout over every cluster's model, keyed by global point index."""
    x_raw = np.asarray(x_raw, dtype=np.float64)
    mean = np.empty(x_raw.shape[0])
    std = np.empty(x_raw.shape[0])
    for c, model in regional.models.items():
        idx = regional.partition.members(c)
        part = mc_dropout_predict(model, x_raw[idx], passes, seed, point_ids=idx)
        mean[idx] = part.mean
        std[idx] = part.std
    logger.info("MC dropout: %d points x %d passes", x_raw.shape[0], passes)
    return UncertaintyMap(mask, mean, std, passes)


def uncertainty_rms(u: UncertaintyMap, w: np.ndarray) -> float:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != u.std.shape:
        raise ArgumentError(f"Expected {u.std.shape} weights, got {w.shape}")
    return float(np.sqrt(np.dot(w, u.std ** 2) / w.sum()))
