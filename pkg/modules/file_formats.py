# Binary grid/model files, partition tables and heatmap images
"""
GRD1 layout (little-endian, no padding):

    magic "GRD1" | version u16 | n_lon u32 | n_lat u32 | n_time u32 |
    lon0 f64 | lat0 f64 | d_lon f64 | d_lat f64 | fill_value f64 |
    start_year i32 | start_month u8 | payload f64[n_time][n_lat][n_lon]

Land cells hold fill_value in every time slice. MDL1 stores one network and its
scaler: magic "MDL1" | version u16 | n_sizes u32 | sizes u32[n_sizes] |
dropout_rate f64 | dropout_layer u32 | l2 f64 | x_min f64[in] | x_max f64[in] |
y_min f64 | y_max f64 | per layer: W f64[in*out] (row-major) then b f64[out].
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from config import Config
from utils.helpers import PathLike, write_csv
from .exceptions import ArgumentError, DataError, FormatError
from .grid_core import Field, Grid, OceanMask
from .neuralnet import ClusterModel, Mlp, RegionalModel, Scaler
from .segmentation import Partition
from .trend import TimeSeriesStack

logger = logging.getLogger(__name__)

GRD1_MAGIC = b"GRD1"
GRD1_VERSION = 1
GRD1_HEADER = struct.Struct("<4sHIIIdddddiB")

MDL1_MAGIC = b"MDL1"
MDL1_VERSION = 1

F64 = np.dtype("<f8")


def write_grd1(data: Union[TimeSeriesStack, Field], path: PathLike,
               fill_value: float = Config.GRD1_FILL_VALUE) -> Path:
    """Write a stack (n_time = months) or a single field (n_time = 1)."""
    if not np.isfinite(fill_value):
        raise ArgumentError(f"GRD1 fill value must be finite, got {fill_value}")
    if isinstance(data, TimeSeriesStack):
        grid = data.mask.grid
        ocean = data.mask.mask
        cube = data.mask.scatter(data.values.T, fill=fill_value)
        start_year, start_month = data.start_year, data.start_month
    elif isinstance(data, Field):
        grid = data.grid
        ocean = np.isfinite(data.values)
        cube = np.where(ocean, data.values, fill_value)[None, :, :]
        start_year, start_month = 0, 1
    else:
        raise TypeError(f"Cannot write {type(data).__name__} as GRD1")
    if np.any(cube[:, ocean] == fill_value):
        raise DataError(f"Ocean values equal the fill value {fill_value}; choose another fill value")

    header = GRD1_HEADER.pack(GRD1_MAGIC, GRD1_VERSION, grid.n_lon, grid.n_lat, cube.shape[0],
                              grid.lon0, grid.lat0, grid.d_lon, grid.d_lat, fill_value,
                              int(start_year), int(start_month))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as file:
        file.write(header)
        file.write(np.ascontiguousarray(cube, dtype=F64).tobytes())
    return path


def _read_grd1_raw(path: PathLike):
    raw = Path(path).read_bytes()
    if len(raw) < GRD1_HEADER.size:
        raise FormatError(f"{path}: file holds {len(raw)} bytes, shorter than the {GRD1_HEADER.size}-byte header")
    (magic, version, n_lon, n_lat, n_time, lon0, lat0, d_lon, d_lat,
     fill_value, start_year, start_month) = GRD1_HEADER.unpack_from(raw)
    if magic != GRD1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {GRD1_MAGIC!r}")
    if version != GRD1_VERSION:
        raise FormatError(f"{path}: unsupported GRD1 version {version}")
    expected = n_lon * n_lat * n_time * F64.itemsize
    actual = len(raw) - GRD1_HEADER.size
    if actual != expected:
        raise FormatError(f"{path}: payload holds {actual} bytes, expected {expected}")
    grid = Grid(n_lon, n_lat, lon0, lat0, d_lon, d_lat)
    cube = np.frombuffer(raw, dtype=F64, offset=GRD1_HEADER.size).reshape(n_time, n_lat, n_lon)
    return grid, cube, fill_value, start_year, start_month


def _grd1_mask(path: PathLike, grid: Grid, cube: np.ndarray, fill_value: float) -> OceanMask:
    land = np.isnan(cube) if np.isnan(fill_value) else cube == fill_value
    if not np.all(land == land[0]):
        raise DataError(f"{path}: land cells (fill value) differ between time slices")
    ocean = ~land[0]
    if not np.all(np.isfinite(cube[:, ocean])):
        raise DataError(f"{path}: non-finite values at ocean cells")
    return OceanMask(grid, ocean)


def read_grd1(path: PathLike, as_stack: bool = None) -> Union[TimeSeriesStack, Field]:
    """Read a GRD1 file; single-slice files come back as a Field unless ``as_stack``."""
    grid, cube, fill_value, start_year, start_month = _read_grd1_raw(path)
    mask = _grd1_mask(path, grid, cube, fill_value)
    if as_stack is None:
        as_stack = cube.shape[0] > 1
    if not as_stack:
        if cube.shape[0] != 1:
            raise FormatError(f"{path}: holds {cube.shape[0]} time slices, expected a single field")
        return Field(grid, np.where(mask.mask, cube[0], np.nan))
    values = np.ascontiguousarray(cube[:, mask.mask].T)
    return TimeSeriesStack(mask, start_year, values, start_month)


def read_grd1_header(path: PathLike) -> dict:
    grid, cube, fill_value, start_year, start_month = _read_grd1_raw(path)
    return {"grid": grid, "n_time": cube.shape[0], "fill_value": fill_value,
            "start_year": start_year, "start_month": start_month}


def write_mdl1(model: ClusterModel, path: PathLike) -> Path:
    mlp, scaler = model.mlp, model.scaler
    parts = [
        MDL1_MAGIC,
        struct.pack("<HI", MDL1_VERSION, len(mlp.layer_sizes)),
        struct.pack(f"<{len(mlp.layer_sizes)}I", *mlp.layer_sizes),
        struct.pack("<dId", mlp.dropout_rate, mlp.dropout_layer_index, mlp.l2),
        np.asarray(scaler.x_min, dtype=F64).tobytes(),
        np.asarray(scaler.x_max, dtype=F64).tobytes(),
        struct.pack("<dd", scaler.y_min, scaler.y_max),
    ]
    for w, b in zip(mlp.weights, mlp.biases):
        parts.append(np.ascontiguousarray(w, dtype=F64).tobytes())
        parts.append(np.ascontiguousarray(b, dtype=F64).tobytes())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(parts))
    return path


def read_mdl1(path: PathLike) -> ClusterModel:
    raw = Path(path).read_bytes()
    try:
        if raw[:4] != MDL1_MAGIC:
            raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {MDL1_MAGIC!r}")
        version, n_sizes = struct.unpack_from("<HI", raw, 4)
        if version != MDL1_VERSION:
            raise FormatError(f"{path}: unsupported MDL1 version {version}")
        offset = 10
        sizes = list(struct.unpack_from(f"<{n_sizes}I", raw, offset))
        offset += 4 * n_sizes
        dropout_rate, dropout_layer, l2 = struct.unpack_from("<dId", raw, offset)
        offset += struct.calcsize("<dId")

        def take(count: int) -> np.ndarray:
            nonlocal offset
            end = offset + count * F64.itemsize
            if end > len(raw):
                raise FormatError(f"{path}: truncated at byte {len(raw)}, needed {end}")
            out = np.frombuffer(raw, dtype=F64, count=count, offset=offset).copy()
            offset = end
            return out

        x_min, x_max = take(sizes[0]), take(sizes[0])
        y_min, y_max = take(2)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(take(fan_in * fan_out).reshape(fan_in, fan_out))
            biases.append(take(fan_out))
    except struct.error as exc:
        raise FormatError(f"{path}: truncated header ({exc})") from exc
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes")
    mlp = Mlp(sizes, weights, biases, dropout_rate, dropout_layer, l2)
    return ClusterModel(mlp, Scaler(x_min, x_max, float(y_min), float(y_max)))


def write_partition_csv(partition: Partition, path: PathLike) -> Path:
    lat_idx, lon_idx = partition.mask.indices
    table = pd.DataFrame({"lat_index": lat_idx, "lon_index": lon_idx, "label": partition.labels})
    return write_csv(path, table)


def read_partition_csv(path: PathLike, mask: OceanMask) -> Partition:
    table = pd.read_csv(path)
    missing = {"lat_index", "lon_index", "label"} - set(table.columns)
    if missing:
        raise FormatError(f"{path}: missing columns {sorted(missing)}")
    position = np.full(mask.grid.shape, -1, dtype=np.int64)
    position[mask.mask] = np.arange(mask.ocean_count)
    idx = position[table["lat_index"].to_numpy(), table["lon_index"].to_numpy()]
    if np.any(idx < 0) or len(np.unique(idx)) != mask.ocean_count or len(idx) != mask.ocean_count:
        raise DataError(f"{path}: rows do not cover every ocean point exactly once")
    labels = np.empty(mask.ocean_count, dtype=np.int64)
    labels[idx] = table["label"].to_numpy()
    return Partition(mask, labels, int(labels.max()) + 1)


def save_regional_model(regional: RegionalModel, directory: PathLike) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_partition_csv(regional.partition, directory / "partition.csv")
    for c, model in regional.models.items():
        write_mdl1(model, directory / f"cluster_{c:03d}.mdl1")
    return directory


def load_regional_model(directory: PathLike, mask: OceanMask) -> RegionalModel:
    directory = Path(directory)
    partition = read_partition_csv(directory / "partition.csv", mask)
    models = {c: read_mdl1(directory / f"cluster_{c:03d}.mdl1") for c in range(partition.k)}
    logger.info("Loaded %d cluster models from %s", partition.k, directory)
    return RegionalModel(partition, models)


# 12-color categorical palette for partition maps; land is black
PALETTE = np.array([
    [230, 159, 0], [86, 180, 233], [0, 158, 115], [240, 228, 66], [0, 114, 178], [213, 94, 0],
    [204, 121, 167], [128, 128, 0], [0, 200, 200], [150, 75, 0], [255, 105, 180], [120, 120, 120],
], dtype=np.uint8)


def write_pgm(field: Field, path: PathLike, vmin: float = None, vmax: float = None) -> Path:
    """8-bit grayscale heatmap, north at the top; gray 0 marks land."""
    values = field.values
    ocean = np.isfinite(values)
    vmin = float(np.nanmin(values)) if vmin is None else float(vmin)
    vmax = float(np.nanmax(values)) if vmax is None else float(vmax)
    span = vmax - vmin
    gray = np.zeros(values.shape, dtype=np.uint8)
    if span > 0:
        scaled = np.clip(np.round((values[ocean] - vmin) / span * 254.0), 0, 254)
    else:
        scaled = np.zeros(int(ocean.sum()))
    gray[ocean] = (scaled + 1).astype(np.uint8)
    header = (f"P5\n# linear gray: value = {vmin!r} + (gray - 1) * {span!r} / 254; gray 0 = land\n"
              f"{values.shape[1]} {values.shape[0]}\n255\n")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header.encode("ascii") + gray[::-1].tobytes())
    return path


def write_partition_ppm(partition: Partition, path: PathLike) -> Path:
    """Color-coded partition map, north at the top; land is black."""
    mask = partition.mask
    rgb = np.zeros(mask.grid.shape + (3,), dtype=np.uint8)
    rgb[mask.mask] = PALETTE[partition.labels % len(PALETTE)]
    header = (f"P6\n# partition: k={partition.k}, palette index = label mod {len(PALETTE)}; black = land\n"
              f"{mask.grid.n_lon} {mask.grid.n_lat}\n255\n")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header.encode("ascii") + rgb[::-1].tobytes())
    return path
