# Spatial segmentation: spectral clustering and the rule-based domain partition
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.spatial.distance import pdist, squareform

from config import Config
from .exceptions import ArgumentError, DegenerateInputError
from .grid_core import OceanMask

logger = logging.getLogger(__name__)

SigmaPolicy = Union[str, float]


@dataclass(frozen=True, eq=False)
class Partition:
    """One cluster label per ocean point, labels 0..k-1 all in use."""

    mask: Optional[OceanMask]
    labels: np.ndarray = field(repr=False)
    k: int = 1

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or not np.issubdtype(labels.dtype, np.integer):
            raise ArgumentError("Partition labels must be a 1-D integer vector")
        if self.mask is not None and labels.size != self.mask.ocean_count:
            raise ArgumentError(f"Expected {self.mask.ocean_count} labels, got {labels.size}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ArgumentError(f"Labels must lie in 0..{self.k - 1}")
        sizes = np.bincount(labels, minlength=self.k)
        if np.any(sizes == 0):
            raise ArgumentError(f"Clusters {np.flatnonzero(sizes == 0).tolist()} are empty")
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def single(cls, mask: OceanMask) -> "Partition":
        return cls(mask, np.zeros(mask.ocean_count, dtype=np.int64), 1)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)


@dataclass(frozen=True, eq=False)
class Affinity:
    a: np.ndarray = field(repr=False)
    sigma: float = 1.0

    @property
    def n(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class DomainBoxes:
    north_atlantic: Tuple[float, float, float, float] = Config.NORTH_ATLANTIC_BOX
    caribbean_cut: Tuple[float, float, float] = Config.CARIBBEAN_CUT
    north_pacific: Tuple[float, float, float, float] = Config.NORTH_PACIFIC_BOX
    southern_latitude: float = Config.SOUTHERN_LATITUDE

    @classmethod
    def from_dict(cls, data: dict) -> "DomainBoxes":
        defaults = cls()
        return cls(
            north_atlantic=tuple(data.get("north_atlantic", defaults.north_atlantic)),
            caribbean_cut=tuple(data.get("caribbean_cut", defaults.caribbean_cut)),
            north_pacific=tuple(data.get("north_pacific", defaults.north_pacific)),
            southern_latitude=float(data.get("southern_latitude", defaults.southern_latitude)),
        )

    def to_dict(self) -> dict:
        return {
            "north_atlantic": list(self.north_atlantic),
            "caribbean_cut": list(self.caribbean_cut),
            "north_pacific": list(self.north_pacific),
            "southern_latitude": self.southern_latitude,
        }


def zscore_rows(features: np.ndarray) -> np.ndarray:
    """Zero mean, unit (population) variance per row; constant rows become zero."""
    x = np.asarray(features, dtype=np.float64)
    centered = x - x.mean(axis=1, keepdims=True)
    std = centered.std(axis=1, keepdims=True)
    return np.divide(centered, std, out=np.zeros_like(centered), where=std > 0)


def build_affinity(features: np.ndarray, sigma: SigmaPolicy = Config.SIGMA_POLICY,
                   knn: Optional[int] = None) -> Affinity:
    """Gaussian affinity between z-scored rows, optionally kNN-sparsified."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ArgumentError(f"Need an [n >= 2, d] feature matrix, got shape {x.shape}")
    z = zscore_rows(x)
    distances = pdist(z, metric="euclidean")

    if sigma == "median":
        sigma_value = float(np.median(distances))
    elif isinstance(sigma, str):
        raise ArgumentError(f"Unknown sigma policy '{sigma}'")
    else:
        sigma_value = float(sigma)
    if not sigma_value > 0:
        raise DegenerateInputError("Kernel width is zero: all feature rows are identical after z-scoring")

    a = squareform(np.exp(-(distances ** 2) / (2.0 * sigma_value ** 2)))
    np.fill_diagonal(a, 1.0)
    if knn is not None:
        a = _knn_sparsify(a, knn)
    return Affinity(a, sigma_value)


def _knn_sparsify(a: np.ndarray, knn: int) -> np.ndarray:
    """Keep each row's ``knn`` strongest off-diagonal links, symmetrized by union."""
    n = a.shape[0]
    if knn < 1:
        raise ArgumentError(f"knn must be positive, got {knn}")
    if knn >= n - 1:
        return a
    off = a.copy()
    np.fill_diagonal(off, -np.inf)
    # stable sort keeps ties on the lowest column index
    nearest = np.argsort(-off, axis=1, kind="stable")[:, :knn]
    keep = np.zeros_like(a, dtype=bool)
    keep[np.repeat(np.arange(n), knn), nearest.ravel()] = True
    keep |= keep.T
    np.fill_diagonal(keep, True)
    return np.where(keep, a, 0.0)


def normalized_laplacian(a: np.ndarray) -> np.ndarray:
    """L = I - D^(-1/2) A D^(-1/2) for an affinity without self-loops."""
    a = np.asarray(a, dtype=np.float64)
    degree = a.sum(axis=1)
    isolated = np.flatnonzero(degree <= 0)
    if isolated.size:
        raise DegenerateInputError(f"Point {int(isolated[0])} has zero degree in the affinity graph")
    d_inv_sqrt = 1.0 / np.sqrt(degree)
    lap = np.eye(a.shape[0]) - d_inv_sqrt[:, None] * a * d_inv_sqrt[None, :]
    return (lap + lap.T) / 2.0


def spectral_embedding(a: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row-normalized eigenvectors of the k smallest Laplacian eigenvalues."""
    lap = normalized_laplacian(a)
    eigenvalues, vectors = linalg.eigh(lap, subset_by_index=[0, k - 1])
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    embedding = np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)
    return embedding, eigenvalues


def _assign(x: np.ndarray, centers: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)  # first minimum: ties go to the lowest center index
    return labels, d2[np.arange(x.shape[0]), labels]


def _kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    closest = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers.append(x[idx])
        closest = np.minimum(closest, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def kmeans(x: np.ndarray, k: int, seed: int, max_iter: int = Config.KMEANS_MAX_ITER,
           tol: float = Config.KMEANS_TOL,
           max_repairs: int = Config.KMEANS_MAX_REPAIRS) -> Tuple[np.ndarray, np.ndarray]:
    """Lloyd's k-means with k-means++ seeding; returns (labels, centers)."""
    x = np.asarray(x, dtype=np.float64)
    if not 1 <= k <= x.shape[0]:
        raise ArgumentError(f"k={k} must lie in 1..{x.shape[0]}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_plus_plus(x, k, rng)
    repairs = 0

    def assign_and_repair(centers):
        nonlocal repairs
        labels, d2 = _assign(x, centers)
        while True:
            counts = np.bincount(labels, minlength=k)
            empty = np.flatnonzero(counts == 0)
            if not empty.size:
                return labels, centers
            repairs += 1
            if repairs > max_repairs:
                raise DegenerateInputError(f"k-means left cluster {int(empty[0])} empty after {max_repairs} repairs")
            movable = counts[labels] > 1
            far = int(np.argmax(np.where(movable, d2, -1.0)))
            logger.warning("k-means: reseeding empty cluster %d at point %d", empty[0], far)
            centers = centers.copy()
            centers[empty[0]] = x[far]
            labels = labels.copy()
            labels[far] = empty[0]
            d2 = d2.copy()
            d2[far] = 0.0

    for iteration in range(max_iter):
        labels, centers = assign_and_repair(centers)
        new_centers = np.array([x[labels == c].mean(axis=0) for c in range(k)])
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if shift <= tol:
            logger.debug("k-means converged after %d iterations", iteration + 1)
            break
    labels, centers = assign_and_repair(centers)
    return labels, centers


def spectral_cluster(features: np.ndarray, k: int, seed: int, mask: Optional[OceanMask] = None,
                     sigma: SigmaPolicy = Config.SIGMA_POLICY, knn: Optional[int] = None) -> Partition:
    """Normalized spectral clustering of feature rows (one row per ocean point)."""
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ArgumentError(f"k={k} must lie in 1..{n}")
    if k == 1:
        return Partition(mask, np.zeros(n, dtype=np.int64), 1)

    affinity = build_affinity(x, sigma=sigma, knn=knn)
    a = affinity.a.copy()
    np.fill_diagonal(a, 0.0)
    embedding, eigenvalues = spectral_embedding(a, k)
    logger.info("Spectral clustering: n=%d k=%d sigma=%.4g smallest eigenvalues %s",
                n, k, affinity.sigma, np.array2string(eigenvalues, precision=4))
    labels, _ = kmeans(embedding, k, seed)
    return Partition(mask, labels, k)


def _normalize_lon(lon: np.ndarray) -> np.ndarray:
    return np.mod(lon, 360.0)


def _in_box(lat: np.ndarray, lon: np.ndarray, box) -> np.ndarray:
    lat_min, lat_max, lon_min, lon_max = box
    # latitude lower edge is exclusive, so equatorial cells belong to the remainder
    return (lat > lat_min) & (lat <= lat_max) & (lon >= lon_min) & (lon < lon_max)


def domain_partition(mask: OceanMask, boxes: DomainBoxes = None) -> Partition:
    """North Atlantic, North Pacific, south of the southern latitude, remainder (in that priority)."""
    boxes = boxes or DomainBoxes()
    lat = mask.point_lats
    lon = _normalize_lon(mask.point_lons)

    cut_lon_min, cut_lon_max, cut_lat = boxes.caribbean_cut
    caribbean_pacific_side = (lon >= cut_lon_min) & (lon < cut_lon_max) & (lat < cut_lat)
    atlantic = _in_box(lat, lon, boxes.north_atlantic) & ~caribbean_pacific_side
    pacific = _in_box(lat, lon, boxes.north_pacific) & ~atlantic
    southern = (lat <= boxes.southern_latitude) & ~atlantic & ~pacific

    labels = np.full(mask.ocean_count, 3, dtype=np.int64)
    labels[southern] = 2
    labels[pacific] = 1
    labels[atlantic] = 0

    sizes = np.bincount(labels, minlength=4)
    if np.any(sizes == 0):
        names = ["north_atlantic", "north_pacific", "southern", "remainder"]
        logger.warning("Domain partition: regions %s are empty on this mask and are dropped",
                       [names[i] for i in np.flatnonzero(sizes == 0)])
        used = np.flatnonzero(sizes > 0)
        remap = np.full(4, -1, dtype=np.int64)
        remap[used] = np.arange(used.size)
        return Partition(mask, remap[labels], int(used.size))
    return Partition(mask, labels, 4)
