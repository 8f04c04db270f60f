# Utility functions
import hashlib
import json
import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

PathLike = Union[str, os.PathLike]

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def setup_logging(level: str = "INFO") -> None:
    """Configure the root logger once with a single stream handler."""
    root = logging.getLogger()
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
    root.setLevel(level.upper())


def load_json_file(file_path: PathLike) -> Dict[str, Any]:
    """Load data from a JSON file."""
    from modules.exceptions import ConfigError

    try:
        with open(file_path, 'r', encoding='utf-8') as file:
            return json.load(file)
    except FileNotFoundError as exc:
        raise ConfigError(f"File not found: {file_path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Invalid JSON in file: {file_path} ({exc})") from exc


def save_json_file(file_path: PathLike, data: Dict[str, Any]) -> Path:
    """Save data to a JSON file with stable key order."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as file:
        json.dump(to_jsonable(data), file, indent=2, sort_keys=True, ensure_ascii=False)
        file.write("\n")
    return path


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays, tuples and paths into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


def write_csv(file_path: PathLike, table: pd.DataFrame) -> Path:
    """Write a table as RFC-4180 CSV (no index, LF line endings, fixed float repr)."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
    return path


def file_sha256(file_path: PathLike) -> str:
    """Hex digest of a file's bytes, used to fingerprint datasets in manifests."""
    digest = hashlib.sha256()
    with open(file_path, 'rb') as file:
        for block in iter(lambda: file.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def derive_seed(seed: int, *keys: Union[int, str]) -> int:
    """Derive an independent 32-bit seed from a base seed and a stable key path."""
    spawn_key = tuple(_key_to_int(k) for k in keys)
    return int(np.random.SeedSequence(seed, spawn_key=spawn_key).generate_state(1)[0])


def _key_to_int(key: Union[int, str]) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key)
    return int.from_bytes(hashlib.sha256(str(key).encode("utf-8")).digest()[:4], "little")


def resolve_path(path: Optional[PathLike], base_dir: PathLike) -> Optional[Path]:
    """Resolve a config path relative to the directory holding the config file."""
    if path is None:
        return None
    path = Path(path)
    return path if path.is_absolute() else Path(base_dir) / path


def format_window(window: Sequence[int]) -> str:
    """Format a (start_year, end_year) window for labels and file names."""
    return f"{int(window[0])}-{int(window[1])}"


def get_current_timestamp() -> str:
    """Get current timestamp as string."""
    return datetime.now().strftime("%Y-%m-%d %H:%M:%S")
