# Shapley-value attribution of predictions to the input climate models
"""
A coalition is a boolean vector over the M features. Features outside the
coalition are integrated out by substituting each background row in turn and
averaging the model output, so v(S) = mean_b f(x_S, bg_b) and v(F) = f(x).
"""

import logging
from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.special import comb

from config import Config
from utils.helpers import derive_seed
from .exceptions import ArgumentError, CapabilityError, NumericalError
from .neuralnet import RegionalModel
from .segmentation import Partition

logger = logging.getLogger(__name__)

ModelFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Attribution:
    phi: np.ndarray = field(repr=False)
    phi0: float = 0.0
    fx: float = 0.0
    point_id: int = -1

    @property
    def local_accuracy_gap(self) -> float:
        return abs(self.phi0 + float(self.phi.sum()) - self.fx)


def coalition_from_members(m: int, members: Sequence[int]) -> np.ndarray:
    included = np.zeros(m, dtype=bool)
    included[list(members)] = True
    return included


def _check_inputs(x: np.ndarray, bg: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    bg = np.atleast_2d(np.asarray(bg, dtype=np.float64))
    if x.ndim != 1 or bg.ndim != 2 or bg.shape[1] != x.size or bg.shape[0] < 1:
        raise ArgumentError(f"Background must be [B >= 1, {x.size}], got {bg.shape}")
    if not np.all(np.isfinite(bg)):
        raise ArgumentError("Background rows must be finite")
    return x, bg


def _coalition_values(f: ModelFn, x: np.ndarray, coalitions: np.ndarray, bg: np.ndarray,
                      chunk_rows: int = 200_000) -> np.ndarray:
    """v(S) for each row of a boolean coalition matrix (n_coalitions, M)."""
    n_bg = bg.shape[0]
    values = np.empty(coalitions.shape[0])
    per_chunk = max(1, chunk_rows // n_bg)
    for start in range(0, coalitions.shape[0], per_chunk):
        block = coalitions[start:start + per_chunk]
        inputs = np.where(block[:, None, :], x[None, None, :], bg[None, :, :])
        out = np.asarray(f(inputs.reshape(-1, x.size)), dtype=np.float64)
        values[start:start + per_chunk] = out.reshape(block.shape[0], n_bg).mean(axis=1)
    full = coalitions.all(axis=1)
    if full.any():
        values[full] = float(np.asarray(f(x[None, :]))[0])
    return values


def coalition_value(f: ModelFn, x: np.ndarray, included: np.ndarray, bg: np.ndarray) -> float:
    x, bg = _check_inputs(x, bg)
    included = np.asarray(included, dtype=bool)
    if included.shape != x.shape:
        raise ArgumentError(f"Coalition must have {x.size} entries, got {included.shape}")
    return float(_coalition_values(f, x, included[None, :], bg)[0])


def _all_coalitions(m: int) -> np.ndarray:
    """Every subset as a boolean row; row index = bitmask of included features."""
    codes = np.arange(1 << m)
    return ((codes[:, None] >> np.arange(m)[None, :]) & 1).astype(bool)


def exact_shapley(f: ModelFn, x: np.ndarray, bg: np.ndarray, point_id: int = -1) -> Attribution:
    """Shapley values by enumerating all 2^M coalitions."""
    x, bg = _check_inputs(x, bg)
    m = x.size
    if m > Config.SHAP_EXACT_LIMIT:
        raise CapabilityError(f"Exact enumeration supports at most {Config.SHAP_EXACT_LIMIT} features, "
                              f"got {m}; use kernel_shap with sampling")
    coalitions = _all_coalitions(m)
    values = _coalition_values(f, x, coalitions, bg)
    sizes = coalitions.sum(axis=1)
    weight_by_size = np.array([factorial(s) * factorial(m - s - 1) / factorial(m) for s in range(m)])

    phi = np.zeros(m)
    codes = np.arange(1 << m)
    for i in range(m):
        without = codes[(codes >> i) & 1 == 0]
        phi[i] = np.sum(weight_by_size[sizes[without]] * (values[without | (1 << i)] - values[without]))
    return Attribution(phi, float(values[0]), float(values[-1]), point_id)


def shapley_kernel_weight(m: int, size: int) -> float:
    """Kernel SHAP weight of one coalition of the given size (interior sizes only)."""
    if not 0 < size < m:
        raise ArgumentError(f"Kernel weight is infinite for size {size} of {m}")
    return (m - 1) / (comb(m, size, exact=True) * size * (m - size))


def _sample_coalitions(m: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Interior coalitions with sizes drawn in proportion to the kernel mass per size."""
    sizes = np.arange(1, m)
    mass = np.array([comb(m, s, exact=True) * shapley_kernel_weight(m, s) for s in sizes])
    drawn = rng.choice(sizes, size=n_samples, p=mass / mass.sum())
    coalitions = np.zeros((n_samples, m), dtype=bool)
    for row, s in enumerate(drawn):
        coalitions[row, rng.choice(m, size=s, replace=False)] = True
    return coalitions


def kernel_shap(f: ModelFn, x: np.ndarray, bg: np.ndarray, n_samples: Optional[int] = None,
                seed: int = Config.DEFAULT_SEED, point_id: int = -1) -> Attribution:
    """Kernel SHAP: weighted linear regression over coalitions with the efficiency constraint.

    ``n_samples=None`` enumerates all 2^M - 2 interior coalitions, which recovers
    the exact Shapley values.
    """
    x, bg = _check_inputs(x, bg)
    m = x.size
    if m < 2:
        raise ArgumentError("Kernel SHAP needs at least two features")

    v_empty = float(_coalition_values(f, x, np.zeros((1, m), dtype=bool), bg)[0])
    fx = float(np.asarray(f(x[None, :]))[0])

    if n_samples is None:
        coalitions = _all_coalitions(m)[1:-1]
        weights = np.array([shapley_kernel_weight(m, s) for s in coalitions.sum(axis=1)])
    else:
        coalitions = _sample_coalitions(m, n_samples, np.random.default_rng(seed))
        weights = np.ones(n_samples)
    values = _coalition_values(f, x, coalitions, bg)

    # eliminate the last feature through phi0 + sum(phi) = f(x)
    z = coalitions.astype(np.float64)
    design = z[:, :-1] - z[:, -1:]
    target = values - v_empty - z[:, -1] * (fx - v_empty)
    gram = design.T @ (weights[:, None] * design)
    rhs = design.T @ (weights * target)
    if np.linalg.matrix_rank(gram) < m - 1:
        raise NumericalError("Kernel SHAP regression is singular; sample more coalitions")
    head = np.linalg.solve(gram, rhs)
    phi = np.append(head, (fx - v_empty) - head.sum())
    return Attribution(phi, v_empty, fx, point_id)


def background_set(x: np.ndarray, size: int = Config.BACKGROUND_SIZE, seed: int = Config.DEFAULT_SEED) -> np.ndarray:
    """Uniform sample (without replacement) of rows, or all rows when fewer."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] <= size:
        return x.copy()
    idx = np.sort(np.random.default_rng(seed).choice(x.shape[0], size=size, replace=False))
    return x[idx]


def cluster_importance(regional: RegionalModel, x_raw: np.ndarray, backgrounds: Dict[int, np.ndarray],
                       feature_names: Sequence[str], method: str = "kernel", unscaled: bool = False,
                       n_samples: Optional[int] = None, seed: int = Config.DEFAULT_SEED):
    """Mean |phi| per feature and cluster, ranked; also returns the per-point table.

    ``x_raw`` holds raw model trends per point; explanations run on the scaled
    inputs of each cluster's deterministic network, and ``backgrounds`` holds
    scaled background rows per cluster.
    """
    if method not in ("kernel", "exact"):
        raise ArgumentError(f"Unknown attribution method '{method}'")
    partition: Partition = regional.partition
    x_raw = np.asarray(x_raw, dtype=np.float64)
    rows, points = [], []
    for c, model in regional.models.items():
        idx = partition.members(c)
        x = model.scaler.transform_x(x_raw[idx])
        f = model.mlp.predict
        scale = model.scaler.y_range if unscaled else 1.0
        phis = np.empty((idx.size, x.shape[1]))
        for j, point in enumerate(idx):
            if method == "exact":
                att = exact_shapley(f, x[j], backgrounds[c], point_id=int(point))
            else:
                att = kernel_shap(f, x[j], backgrounds[c], n_samples=n_samples,
                                  seed=derive_seed(seed, "shap", int(point)), point_id=int(point))
            phis[j] = att.phi * scale
            points.append({"point": int(point), "cluster": c, "phi0": att.phi0 * scale,
                           **{name: v for name, v in zip(feature_names, phis[j])}})
        mean_abs = np.abs(phis).mean(axis=0)
        order = np.argsort(-mean_abs, kind="stable")
        for rank, i in enumerate(order, start=1):
            rows.append({"cluster": c, "feature": feature_names[i], "mean_abs_phi": float(mean_abs[i]),
                         "rank": rank})
        logger.info("Cluster %d importance ranking: %s", c, [feature_names[i] for i in order])
    return pd.DataFrame(rows), pd.DataFrame(points).sort_values("point", kind="stable").reset_index(drop=True)
