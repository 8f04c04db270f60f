# Per-gridpoint time-series operations: deseasonalization and OLS trends
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from config import Config
from .exceptions import ArgumentError
from .grid_core import Field, OceanMask, area_weights

Window = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class TimeSeriesStack:
    """Monthly series (mm) for every ocean point: values[point, month]."""

    mask: OceanMask
    start_year: int
    values: np.ndarray = field(repr=False)
    start_month: int = 1

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != self.mask.ocean_count:
            raise ArgumentError(
                f"Stack values must be [{self.mask.ocean_count} points x months], got {values.shape}"
            )
        if not 1 <= self.start_month <= 12:
            raise ArgumentError(f"start_month must be in 1..12, got {self.start_month}")
        if not np.all(np.isfinite(values)):
            raise ArgumentError("Stack values must be finite at every ocean point")
        object.__setattr__(self, "values", values)

    @property
    def n_months(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        """Month centers in fractional years."""
        m = np.arange(self.n_months, dtype=np.float64)
        return self.start_year + (self.start_month - 1 + m + 0.5) / 12.0

    def month_index(self, year: int) -> int:
        """Column of January of ``year`` (may fall outside the stack)."""
        return (year - self.start_year) * 12 - (self.start_month - 1)

    def with_values(self, values: np.ndarray) -> "TimeSeriesStack":
        return TimeSeriesStack(self.mask, self.start_year, values, self.start_month)

    def restrict(self, mask: OceanMask) -> "TimeSeriesStack":
        """Keep only the points of a sub-mask (e.g. the datasets' shared mask)."""
        if mask.grid != self.mask.grid or np.any(mask.mask & ~self.mask.mask):
            raise ArgumentError("Target mask is not a subset of the stack's mask")
        keep = mask.mask[self.mask.mask]
        return TimeSeriesStack(mask, self.start_year, self.values[keep], self.start_month)

    def month_field(self, m: int) -> Field:
        return Field.from_points(self.mask, self.values[:, m])


@dataclass(frozen=True, eq=False)
class TrendMap:
    """Per-point linear trend in mm/year over an inclusive (start_year, end_year) window."""

    mask: OceanMask
    slope: np.ndarray = field(repr=False)
    window: Window = (0, 0)

    def __post_init__(self):
        slope = np.asarray(self.slope, dtype=np.float64)
        if slope.shape != (self.mask.ocean_count,):
            raise ArgumentError(f"Expected {self.mask.ocean_count} slopes, got {slope.shape}")
        if not np.all(np.isfinite(slope)):
            raise ArgumentError("Trend slopes must be finite")
        object.__setattr__(self, "slope", slope)
        object.__setattr__(self, "window", (int(self.window[0]), int(self.window[1])))

    def to_field(self) -> Field:
        return Field.from_points(self.mask, self.slope)

    def with_slope(self, slope: np.ndarray, window: Window = None) -> "TrendMap":
        return TrendMap(self.mask, slope, self.window if window is None else window)


def fit_linear_trend(series: np.ndarray, t: np.ndarray) -> float:
    """OLS slope of ``series`` against ``t`` (units of series per unit of t)."""
    y = np.asarray(series, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if y.ndim != 1 or y.shape != t.shape:
        raise ArgumentError(f"Series and times must be 1-D of equal length, got {y.shape} and {t.shape}")
    if y.size < 2:
        raise ArgumentError("Need at least two samples to fit a trend")
    if not np.all(np.diff(t) > 0):
        raise ArgumentError("Times must be strictly increasing")
    tc = t - t.mean()
    return float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))


def slice_window(stack: TimeSeriesStack, window: Window) -> TimeSeriesStack:
    """Sub-stack covering whole years start_year..end_year inclusive."""
    start, end = int(window[0]), int(window[1])
    if end < start:
        raise ArgumentError(f"Empty window {window}")
    i0 = stack.month_index(start)
    i1 = stack.month_index(end + 1)
    if i0 < 0 or i1 > stack.n_months:
        last = stack.times[-1]
        raise ArgumentError(
            f"Window {start}-{end} lies outside the stack span {stack.start_year}-{int(last)}"
        )
    return TimeSeriesStack(stack.mask, start, stack.values[:, i0:i1], 1)


def trend_map(stack: TimeSeriesStack, window: Window = None) -> TrendMap:
    """Fit a linear trend at every ocean point over ``window`` (default: whole stack)."""
    if window is None:
        sub = stack
        window = (stack.start_year, int(np.floor(stack.times[-1])))
    else:
        sub = slice_window(stack, window)
    if sub.n_months < Config.MIN_TREND_MONTHS:
        raise ArgumentError(f"Trend window needs at least {Config.MIN_TREND_MONTHS} months, got {sub.n_months}")

    t = sub.times
    tc = t - t.mean()
    y = sub.values
    # per-point sums in a fixed order: identical to fit_linear_trend applied row by row
    slopes = ((y - y.mean(axis=1, keepdims=True)) @ tc) / np.dot(tc, tc)
    return TrendMap(stack.mask, slopes, window)


def deseasonalize(stack: TimeSeriesStack) -> TimeSeriesStack:
    """Subtract each calendar month's mean (the monthly climatology) per point."""
    if stack.n_months % 12:
        raise ArgumentError(f"Deseasonalizing needs whole years, got {stack.n_months} months")
    n_years = stack.n_months // 12
    cube = stack.values.reshape(stack.mask.ocean_count, n_years, 12)
    anomalies = cube - cube.mean(axis=1, keepdims=True)
    return stack.with_values(anomalies.reshape(stack.mask.ocean_count, stack.n_months))


def remove_global_mean_monthly(stack: TimeSeriesStack, w: np.ndarray = None) -> TimeSeriesStack:
    """Subtract the area-weighted ocean mean from every monthly slice."""
    if w is None:
        w = area_weights(stack.mask)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (stack.mask.ocean_count,):
        raise ArgumentError(f"Expected {stack.mask.ocean_count} weights, got {w.shape}")
    means = (w @ stack.values) / w.sum()
    return stack.with_values(stack.values - means[None, :])
