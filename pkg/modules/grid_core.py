# Grid geometry, ocean masking and latitude-weighted reductions
"""
Every per-point vector in the package follows one canonical ordering of ocean
cells: row-major over the (n_lat, n_lon) lattice, latitude outer from south to
north, longitude inner eastward from lon0. ``OceanMask.gather`` and
``OceanMask.scatter`` are the only conversions between lattice arrays and
per-point vectors.
"""

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .exceptions import ArgumentError, DataError


@dataclass(frozen=True)
class Grid:
    n_lon: int
    n_lat: int
    lon0: float
    lat0: float
    d_lon: float
    d_lat: float

    def __post_init__(self):
        if self.n_lon < 1 or self.n_lat < 1:
            raise ArgumentError(f"Grid needs at least one cell per axis, got {self.n_lon}x{self.n_lat}")
        if not (self.d_lon > 0 and self.d_lat > 0):
            raise ArgumentError(f"Grid steps must be positive, got d_lon={self.d_lon}, d_lat={self.d_lat}")
        lats = self.lats
        if lats[0] <= -90.0 or lats[-1] >= 90.0:
            raise ArgumentError(
                f"Cell-center latitudes must lie strictly inside (-90, 90), got [{lats[0]}, {lats[-1]}]"
            )

    @classmethod
    def regular(cls, n_lon: int, n_lat: int) -> "Grid":
        """Global grid whose cells tile the sphere, e.g. 180x90 for 2 degrees."""
        d_lon = 360.0 / n_lon
        d_lat = 180.0 / n_lat
        return cls(n_lon=n_lon, n_lat=n_lat, lon0=d_lon / 2.0, lat0=-90.0 + d_lat / 2.0,
                   d_lon=d_lon, d_lat=d_lat)

    @property
    def shape(self) -> tuple:
        return (self.n_lat, self.n_lon)

    @property
    def lats(self) -> np.ndarray:
        return self.lat0 + self.d_lat * np.arange(self.n_lat, dtype=np.float64)

    @property
    def lons(self) -> np.ndarray:
        return self.lon0 + self.d_lon * np.arange(self.n_lon, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class OceanMask:
    grid: Grid
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != self.grid.shape:
            raise ArgumentError(f"Mask shape {mask.shape} does not match grid {self.grid.shape}")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def all_ocean(cls, grid: Grid) -> "OceanMask":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @property
    def ocean_count(self) -> int:
        return int(self.mask.sum())

    @property
    def indices(self) -> tuple:
        """(lat_index, lon_index) arrays of ocean cells in canonical order."""
        return np.nonzero(self.mask)

    @property
    def point_lats(self) -> np.ndarray:
        return self.grid.lats[self.indices[0]]

    @property
    def point_lons(self) -> np.ndarray:
        return self.grid.lons[self.indices[1]]

    def gather(self, values: np.ndarray) -> np.ndarray:
        """Lattice array (..., n_lat, n_lon) -> per-point array (..., ocean_count)."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-2:] != self.grid.shape:
            raise ArgumentError(f"Array shape {values.shape} does not end in grid shape {self.grid.shape}")
        return values[..., self.mask]

    def scatter(self, points: np.ndarray, fill: float = np.nan) -> np.ndarray:
        """Per-point array (..., ocean_count) -> lattice array with ``fill`` on land."""
        points = np.asarray(points, dtype=np.float64)
        if points.shape[-1] != self.ocean_count:
            raise ArgumentError(f"Expected {self.ocean_count} ocean values, got {points.shape[-1]}")
        out = np.full(points.shape[:-1] + self.grid.shape, fill, dtype=np.float64)
        out[..., self.mask] = points
        return out

    def same_as(self, other: "OceanMask") -> bool:
        return self.grid == other.grid and np.array_equal(self.mask, other.mask)

    def __eq__(self, other):
        return isinstance(other, OceanMask) and self.same_as(other)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ArgumentError(f"Field shape {values.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_points(cls, mask: OceanMask, points: np.ndarray) -> "Field":
        points = np.asarray(points, dtype=np.float64)
        if not np.all(np.isfinite(points)):
            raise ArgumentError("Field values must be finite at every ocean point")
        return cls(mask.grid, mask.scatter(points))

    def to_points(self, mask: OceanMask) -> np.ndarray:
        if mask.grid != self.grid:
            raise ArgumentError("Field and mask are defined on different grids")
        points = mask.gather(self.values)
        if not np.all(np.isfinite(points)):
            raise DataError("Field has missing values at ocean points of the mask")
        return points

    def valid_mask(self) -> OceanMask:
        return OceanMask(self.grid, np.isfinite(self.values))


def area_weights(mask: OceanMask) -> np.ndarray:
    """Cosine-latitude weight of every ocean point."""
    return np.cos(np.deg2rad(mask.point_lats))


def weighted_mean(x: np.ndarray, w: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.shape != w.shape or x.ndim != 1:
        raise ArgumentError(f"Values and weights must be 1-D of equal length, got {x.shape} and {w.shape}")
    if x.size == 0:
        raise ArgumentError("Cannot average an empty vector")
    if not np.all(np.isfinite(x)):
        raise ArgumentError("Values must be finite")
    return float(np.dot(w, x) / np.sum(w))


def remove_global_mean(f: Field, mask: OceanMask) -> Field:
    """Subtract the area-weighted ocean mean; land cells keep their sentinel."""
    points = f.to_points(mask)
    points = points - weighted_mean(points, area_weights(mask))
    values = np.array(f.values, copy=True)
    values[mask.mask] = points
    return Field(f.grid, values)


def coarsen(f: Field, factor: int, mask_policy: str = "majority") -> Field:
    """Block-average by ``factor``; a coarse cell is ocean when at least half its block is."""
    if mask_policy != "majority":
        raise ArgumentError(f"Unknown mask policy '{mask_policy}'")
    if factor < 1 or f.grid.n_lon % factor or f.grid.n_lat % factor:
        raise ArgumentError(
            f"Factor {factor} must be >= 1 and divide the grid {f.grid.n_lon}x{f.grid.n_lat}"
        )
    if factor == 1:
        return Field(f.grid, np.array(f.values, copy=True))

    n_lat, n_lon = f.grid.n_lat // factor, f.grid.n_lon // factor
    blocks = f.values.reshape(n_lat, factor, n_lon, factor)
    valid = np.isfinite(blocks)
    counts = valid.sum(axis=(1, 3))
    sums = np.where(valid, blocks, 0.0).sum(axis=(1, 3))
    ocean = counts * 2 >= factor * factor
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(ocean & (counts > 0), sums / np.maximum(counts, 1), np.nan)

    g = f.grid
    coarse = Grid(
        n_lon=n_lon, n_lat=n_lat,
        lon0=g.lon0 + (factor - 1) * g.d_lon / 2.0,
        lat0=g.lat0 + (factor - 1) * g.d_lat / 2.0,
        d_lon=g.d_lon * factor, d_lat=g.d_lat * factor,
    )
    return Field(coarse, values)


def shared_mask(masks: Iterable[OceanMask], grid: Optional[Grid] = None) -> OceanMask:
    """Intersection of the valid cells of several datasets on one grid."""
    masks = list(masks)
    if not masks:
        raise ArgumentError("Need at least one mask to intersect")
    grid = grid or masks[0].grid
    combined = np.ones(grid.shape, dtype=bool)
    for m in masks:
        if m.grid != grid:
            raise DataError(f"Dataset grid {m.grid} differs from {grid}")
        combined &= m.mask
    if not combined.any():
        raise DataError("Datasets share no valid ocean point")
    return OceanMask(grid, combined)
