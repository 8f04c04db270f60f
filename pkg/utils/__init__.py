# Sea Level Trend Forecaster - Utils Package
"""
File, logging and seeding helpers shared by the forecaster modules.
"""

from .helpers import (
    setup_logging,
    load_json_file,
    save_json_file,
    write_csv,
    file_sha256,
    derive_seed,
    resolve_path,
    format_window,
    get_current_timestamp
)

__all__ = [
    'setup_logging',
    'load_json_file',
    'save_json_file',
    'write_csv',
    'file_sha256',
    'derive_seed',
    'resolve_path',
    'format_window',
    'get_current_timestamp'
]
