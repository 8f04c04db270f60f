# Fully connected regression networks, one per cluster
"""
Weights are stored as (fan_in, fan_out) matrices so a batch X of shape
(n, fan_in) propagates as ``X @ W + b``. Hidden layers use relu, the output is
linear, and a single dropout layer acts on the activations of hidden layer
``dropout_layer_index``. Dropout is inverted: kept activations are divided by
(1 - p) at train time so deterministic inference needs no rescaling and
MC-dropout shares the same code path.
"""

import copy
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.model_selection import KFold
from sklearn.preprocessing import MinMaxScaler

from config import Config
from utils.helpers import derive_seed
from .exceptions import ArgumentError, DegenerateInputError, TrainingDivergedError
from .segmentation import Partition

logger = logging.getLogger(__name__)


@dataclass
class Mlp:
    layer_sizes: List[int]
    weights: List[np.ndarray] = field(repr=False)
    biases: List[np.ndarray] = field(repr=False)
    dropout_rate: float = Config.DROPOUT
    dropout_layer_index: int = Config.DROPOUT_LAYER_INDEX
    l2: float = Config.L2

    def __post_init__(self):
        sizes = [int(s) for s in self.layer_sizes]
        if len(sizes) < 3 or sizes[-1] != 1 or min(sizes) < 1:
            raise ArgumentError(f"Layer sizes must be [in, hidden..., 1] with at least one hidden layer, got {sizes}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ArgumentError(f"Dropout rate must lie in [0, 1), got {self.dropout_rate}")
        if not 0 <= self.dropout_layer_index < len(sizes) - 2:
            raise ArgumentError(f"Dropout layer index {self.dropout_layer_index} is not a hidden layer")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ArgumentError("Need one weight matrix and bias vector per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ArgumentError(f"Layer {i} has shapes {w.shape}/{b.shape}, expected "
                                    f"{(sizes[i], sizes[i + 1])}/{(sizes[i + 1],)}")
        self.layer_sizes = sizes

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], seed: int, dropout_rate: float = Config.DROPOUT,
                   dropout_layer_index: int = Config.DROPOUT_LAYER_INDEX, l2: float = Config.L2) -> "Mlp":
        """He-normal weights (variance 2/fan_in), zero biases."""
        rng = np.random.default_rng(seed)
        sizes = [int(s) for s in layer_sizes]
        weights = [rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
                   for fan_in, fan_out in zip(sizes[:-1], sizes[1:])]
        biases = [np.zeros(fan_out) for fan_out in sizes[1:]]
        return cls(sizes, weights, biases, dropout_rate, dropout_layer_index, l2)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def dropout_width(self) -> int:
        return self.layer_sizes[self.dropout_layer_index + 1]

    def copy(self) -> "Mlp":
        return copy.deepcopy(self)

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in the fixed order W0, b0, W1, b1, ..."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def draw_dropout_mask(self, rng: np.random.Generator, n_rows: int) -> np.ndarray:
        """Bernoulli keep-mask (1.0 kept, 0.0 dropped) for the dropout layer."""
        return (rng.random((n_rows, self.dropout_width)) >= self.dropout_rate).astype(np.float64)

    def _forward(self, x: np.ndarray, dropout_mask: Optional[np.ndarray] = None):
        inputs, pre_activations = [], []
        a = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            z = a @ w + b
            if i == self.n_layers - 1:
                return z[:, 0], (inputs, pre_activations)
            pre_activations.append(z)
            a = np.maximum(z, 0.0)
            if dropout_mask is not None and i == self.dropout_layer_index:
                a = a * dropout_mask / (1.0 - self.dropout_rate)

    def predict(self, x: np.ndarray, dropout_mask: Optional[np.ndarray] = None) -> np.ndarray:
        """Batch forward pass: (n, n_inputs) -> (n,)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_inputs:
            raise ArgumentError(f"Expected inputs of shape (n, {self.n_inputs}), got {x.shape}")
        if dropout_mask is not None and dropout_mask.shape != (x.shape[0], self.dropout_width):
            raise ArgumentError(f"Dropout mask shape {dropout_mask.shape} does not match "
                                f"{(x.shape[0], self.dropout_width)}")
        out, _ = self._forward(x, dropout_mask)
        return out


@dataclass
class Scaler:
    """Min-max scaling of features and label into [0, 1] over the fitted data.

    Backed by sklearn ``MinMaxScaler`` with clipping off, so values outside the
    fitted range map outside [0, 1].
    """

    x_min: np.ndarray
    x_max: np.ndarray
    y_min: float
    y_max: float
    _x: MinMaxScaler = field(init=False, repr=False, compare=False)
    _y: MinMaxScaler = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.x_min = np.asarray(self.x_min, dtype=np.float64)
        self.x_max = np.asarray(self.x_max, dtype=np.float64)
        self.y_min, self.y_max = float(self.y_min), float(self.y_max)
        self._x = MinMaxScaler(clip=False).fit(np.vstack([self.x_min, self.x_max]))
        self._y = MinMaxScaler(clip=False).fit(np.array([[self.y_min], [self.y_max]]))

    @classmethod
    def fit(cls, x_raw: np.ndarray, y_raw: np.ndarray) -> "Scaler":
        x_raw = np.asarray(x_raw, dtype=np.float64)
        y_raw = np.asarray(y_raw, dtype=np.float64)
        if x_raw.ndim != 2 or y_raw.shape != (x_raw.shape[0],):
            raise ArgumentError(f"Expected X (n, m) and y (n,), got {x_raw.shape} and {y_raw.shape}")
        x_fit = MinMaxScaler().fit(x_raw)
        constant = np.flatnonzero(x_fit.data_range_ <= 0)
        if constant.size:
            raise DegenerateInputError(f"Feature columns {constant.tolist()} are constant; cannot scale")
        y_fit = MinMaxScaler().fit(y_raw[:, None])
        if y_fit.data_range_[0] <= 0:
            raise DegenerateInputError("Label is constant; cannot scale")
        return cls(x_fit.data_min_, x_fit.data_max_, y_fit.data_min_[0], y_fit.data_max_[0])

    @property
    def y_range(self) -> float:
        return self.y_max - self.y_min

    def transform_x(self, x_raw: np.ndarray) -> np.ndarray:
        return self._x.transform(np.asarray(x_raw, dtype=np.float64))

    def inverse_x(self, x: np.ndarray) -> np.ndarray:
        return self._x.inverse_transform(np.asarray(x, dtype=np.float64))

    def transform_y(self, y_raw: np.ndarray) -> np.ndarray:
        return self._y.transform(np.asarray(y_raw, dtype=np.float64).reshape(-1, 1))[:, 0]

    def inverse_y(self, y: np.ndarray) -> np.ndarray:
        return self._y.inverse_transform(np.asarray(y, dtype=np.float64).reshape(-1, 1))[:, 0]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = Config.LEARNING_RATE
    epochs: int = Config.EPOCHS
    batch_size: int = Config.BATCH_SIZE
    l2: float = Config.L2
    dropout: float = Config.DROPOUT
    seed: int = Config.DEFAULT_SEED
    patience: int = Config.PATIENCE
    validation_fraction: float = Config.VALIDATION_FRACTION
    beta1: float = Config.ADAM_BETA1
    beta2: float = Config.ADAM_BETA2
    epsilon: float = Config.ADAM_EPSILON

    def __post_init__(self):
        if self.learning_rate < 0 or self.epochs < 1 or self.batch_size < 1 or self.l2 < 0:
            raise ArgumentError(f"Invalid training configuration {self}")
        if not 0.0 <= self.dropout < 1.0:
            raise ArgumentError(f"Dropout must lie in [0, 1), got {self.dropout}")
        if not 0.0 <= self.validation_fraction < 1.0 or self.patience < 1:
            raise ArgumentError(f"Invalid early-stopping settings {self}")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ArgumentError(f"Unknown training settings {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Scaled inputs X (n, m), scaled label y (n,), latitude weights w (n,)."""

    X: np.ndarray
    y: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        w = np.asarray(self.w, dtype=np.float64)
        if X.ndim != 2 or y.shape != (X.shape[0],) or w.shape != (X.shape[0],):
            raise ArgumentError(f"Inconsistent training set shapes {X.shape}, {y.shape}, {w.shape}")
        if X.shape[0] == 0:
            raise ArgumentError("Training set is empty")
        if np.any(w <= 0):
            raise ArgumentError("Point weights must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, idx: np.ndarray) -> "TrainingSet":
        return TrainingSet(self.X[idx], self.y[idx], self.w[idx])


@dataclass
class TrainHistory:
    loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    best_epoch: int = 0
    epochs_run: int = 0


@dataclass(frozen=True)
class ModelCandidate:
    hidden_sizes: Tuple[int, ...]
    train_config: TrainConfig = TrainConfig()


@dataclass
class SelectionResult:
    best_index: int
    best: ModelCandidate
    fold_scores: np.ndarray  # (n_candidates, k)

    @property
    def mean_scores(self) -> np.ndarray:
        return self.fold_scores.mean(axis=1)


def scaler_fit_transform(x_raw: np.ndarray, y_raw: np.ndarray) -> Tuple[Scaler, np.ndarray, np.ndarray]:
    scaler = Scaler.fit(x_raw, y_raw)
    return scaler, scaler.transform_x(x_raw), scaler.transform_y(y_raw)


def forward(m: Mlp, x: np.ndarray, mode: str = "deterministic", seed: Optional[int] = None):
    """Forward one input vector (returns float) or a batch (returns array)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != m.n_inputs:
        raise ArgumentError(f"Input dimension {x.shape} does not match network input {m.n_inputs}")
    if mode == "deterministic":
        out = m.predict(batch)
    elif mode == "dropout":
        rng = np.random.default_rng(seed)
        out = m.predict(batch, m.draw_dropout_mask(rng, batch.shape[0]))
    else:
        raise ArgumentError(f"Unknown forward mode '{mode}'")
    return float(out[0]) if single else out


def weighted_mse(prediction: np.ndarray, target: np.ndarray, w: np.ndarray) -> float:
    residual = prediction - target
    return float(np.dot(w, residual * residual) / np.sum(w))


def l2_penalty(m: Mlp) -> float:
    return m.l2 * float(sum(np.sum(w * w) for w in m.weights))


def loss(m: Mlp, batch: TrainingSet, dropout_mask: Optional[np.ndarray] = None) -> float:
    """Latitude-weighted MSE plus the l2 penalty on weights (biases excluded)."""
    return weighted_mse(m.predict(batch.X, dropout_mask), batch.y, batch.w) + l2_penalty(m)


def gradients(m: Mlp, batch: TrainingSet, dropout_mask: Optional[np.ndarray] = None) -> List[np.ndarray]:
    """Exact gradient of ``loss`` by backpropagation, in ``Mlp.parameters()`` order."""
    out, (inputs, pre_activations) = m._forward(batch.X, dropout_mask)
    delta = (2.0 * batch.w * (out - batch.y) / np.sum(batch.w))[:, None]
    grads: List[np.ndarray] = [None] * (2 * m.n_layers)
    for i in reversed(range(m.n_layers)):
        grads[2 * i] = inputs[i].T @ delta + 2.0 * m.l2 * m.weights[i]
        grads[2 * i + 1] = delta.sum(axis=0)
        if i == 0:
            break
        upstream = delta @ m.weights[i].T
        if dropout_mask is not None and i - 1 == m.dropout_layer_index:
            upstream = upstream * dropout_mask / (1.0 - m.dropout_rate)
        delta = upstream * (pre_activations[i - 1] > 0)
    return grads


def _split_validation(n: int, fraction: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    n_val = int(round(fraction * n))
    order = rng.permutation(n)
    if n_val < 1 or n - n_val < 1:
        return order, np.empty(0, dtype=np.int64)
    return order[n_val:], order[:n_val]


def train(m: Mlp, data: TrainingSet, cfg: TrainConfig) -> Tuple[Mlp, TrainHistory]:
    """Minibatch Adam on the weighted loss with dropout active; returns a trained copy."""
    model = m.copy()
    model.l2 = cfg.l2
    model.dropout_rate = cfg.dropout
    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = _split_validation(len(data), cfg.validation_fraction, rng)
    train_set = data.subset(train_idx)
    val_set = data.subset(val_idx) if val_idx.size else None

    params = model.parameters()
    first = [np.zeros_like(p) for p in params]
    second = [np.zeros_like(p) for p in params]
    history = TrainHistory()
    best_score, best_params, since_best = np.inf, None, 0
    step = 0

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_set))
        for start in range(0, len(train_set), cfg.batch_size):
            batch = train_set.subset(order[start:start + cfg.batch_size])
            mask = model.draw_dropout_mask(rng, len(batch)) if model.dropout_rate > 0 else None
            grads = gradients(model, batch, mask)
            step += 1
            correction1 = 1.0 - cfg.beta1 ** step
            correction2 = 1.0 - cfg.beta2 ** step
            for p, g, m1, m2 in zip(params, grads, first, second):
                m1 *= cfg.beta1
                m1 += (1.0 - cfg.beta1) * g
                m2 *= cfg.beta2
                m2 += (1.0 - cfg.beta2) * g * g
                p -= cfg.learning_rate * (m1 / correction1) / (np.sqrt(m2 / correction2) + cfg.epsilon)

        epoch_loss = loss(model, train_set)
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch, epoch_loss)
        history.loss.append(epoch_loss)
        history.epochs_run = epoch

        score = epoch_loss
        if val_set is not None:
            score = weighted_mse(model.predict(val_set.X), val_set.y, val_set.w)
            history.val_loss.append(score)
        logger.debug("epoch %d loss %.6g val %.6g", epoch, epoch_loss, score)

        if score < best_score:
            best_score, since_best, history.best_epoch = score, 0, epoch
            best_params = [p.copy() for p in params]
        else:
            since_best += 1
            if val_set is not None and since_best >= cfg.patience:
                logger.info("Early stop at epoch %d (best epoch %d)", epoch, history.best_epoch)
                break

    if best_params is not None:
        for p, best in zip(params, best_params):
            p[...] = best
    return model, history


def kfold_select(candidates: Sequence[ModelCandidate], data: TrainingSet, k: int = Config.KFOLD,
                 seed: int = Config.DEFAULT_SEED) -> SelectionResult:
    """Mean validation weighted-MSE over k folds per candidate; earliest candidate wins ties."""
    if not candidates:
        raise ArgumentError("Need at least one candidate architecture")
    if k < 2 or len(data) < k:
        raise ArgumentError(f"k-fold needs 2 <= k <= rows, got k={k} with {len(data)} rows")
    folds = list(KFold(n_splits=k, shuffle=True, random_state=seed).split(data.X))
    scores = np.zeros((len(candidates), k))
    for ci, candidate in enumerate(candidates):
        cfg = candidate.train_config
        for fi, (rest, fold) in enumerate(folds):
            model = Mlp.initialize([data.X.shape[1], *candidate.hidden_sizes, 1], seed=cfg.seed,
                                   dropout_rate=cfg.dropout, l2=cfg.l2)
            model, _ = train(model, data.subset(rest), cfg)
            held = data.subset(fold)
            scores[ci, fi] = weighted_mse(model.predict(held.X), held.y, held.w)
        logger.info("Candidate %s: mean fold MSE %.6g", candidate.hidden_sizes, scores[ci].mean())
    best = int(np.argmin(scores.mean(axis=1)))
    return SelectionResult(best, candidates[best], scores)


@dataclass(frozen=True)
class ArchitecturePolicy:
    """Clusters holding at least ``big_fraction`` of all points get the big network."""

    big_hidden_sizes: Tuple[int, ...] = tuple(Config.BIG_HIDDEN_SIZES)
    small_hidden_sizes: Tuple[int, ...] = tuple(Config.SMALL_HIDDEN_SIZES)
    big_fraction: float = Config.BIG_CLUSTER_FRACTION

    def hidden_sizes_for(self, cluster_size: int, total: int) -> Tuple[int, ...]:
        if cluster_size >= self.big_fraction * total:
            return self.big_hidden_sizes
        return self.small_hidden_sizes


@dataclass
class ClusterModel:
    mlp: Mlp
    scaler: Scaler
    history: Optional[TrainHistory] = None
    selection: Optional[SelectionResult] = None

    def predict(self, x_raw: np.ndarray) -> np.ndarray:
        """Deterministic prediction in label units (mm/year)."""
        return self.scaler.inverse_y(self.mlp.predict(self.scaler.transform_x(x_raw)))


@dataclass
class RegionalModel:
    """One trained network and scaler per cluster of a partition."""

    partition: Partition
    models: Dict[int, ClusterModel]

    @classmethod
    def fit(cls, x_raw: np.ndarray, y_raw: np.ndarray, w: np.ndarray, partition: Partition,
            cfg: TrainConfig, architectures: ArchitecturePolicy = ArchitecturePolicy(),
            candidates: Optional[Sequence[Tuple[int, ...]]] = None, kfold: int = Config.KFOLD,
            threads: int = 1) -> "RegionalModel":
        x_raw = np.asarray(x_raw, dtype=np.float64)
        y_raw = np.asarray(y_raw, dtype=np.float64)
        total = x_raw.shape[0]

        def fit_cluster(c: int) -> ClusterModel:
            idx = partition.members(c)
            scaler, x, y = scaler_fit_transform(x_raw[idx], y_raw[idx])
            data = TrainingSet(x, y, w[idx])
            cluster_cfg = replace(cfg, seed=derive_seed(cfg.seed, "cluster", c))
            selection = None
            if candidates:
                options = [ModelCandidate(tuple(h), cluster_cfg) for h in candidates]
                selection = kfold_select(options, data, k=kfold, seed=derive_seed(cfg.seed, "kfold", c))
                hidden = selection.best.hidden_sizes
            else:
                hidden = architectures.hidden_sizes_for(idx.size, total)
            mlp = Mlp.initialize([x.shape[1], *hidden, 1], seed=derive_seed(cfg.seed, "init", c),
                                 dropout_rate=cfg.dropout, l2=cfg.l2)
            mlp, history = train(mlp, data, cluster_cfg)
            logger.info("Cluster %d: %d points, hidden %s, %d epochs, final loss %.4g",
                        c, idx.size, list(hidden), history.epochs_run, history.loss[-1])
            return ClusterModel(mlp, scaler, history, selection)

        clusters = range(partition.k)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                fitted = list(pool.map(fit_cluster, clusters))
        else:
            fitted = [fit_cluster(c) for c in clusters]
        return cls(partition, dict(zip(clusters, fitted)))

    def predict(self, x_raw: np.ndarray) -> np.ndarray:
        x_raw = np.asarray(x_raw, dtype=np.float64)
        out = np.empty(x_raw.shape[0])
        for c, model in self.models.items():
            idx = self.partition.members(c)
            out[idx] = model.predict(x_raw[idx])
        return out
