"""
Utility module initialization.
Exports common utilities for use throughout the system.
"""

from .data_utils import load_csv_file, load_json_file, read_tsv, write_tsv
from .interpolation import cubic_weight_matrix, half_pixel_positions, keys_kernel

__all__ = [
    # Text / tabular IO
    "load_csv_file",
    "load_json_file",
    "read_tsv",
    "write_tsv",

    # Cubic convolution
    "cubic_weight_matrix",
    "half_pixel_positions",
    "keys_kernel",
]
