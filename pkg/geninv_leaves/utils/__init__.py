"""Shared helpers: matrix/problem file I/O and thread fan-out."""

from .parallel import map_lines
from .matrix_io import (
    LeafTable,
    format_matrix,
    parse_matrix,
    read_matrix,
    write_matrix,
    parse_problem,
    load_problem,
    write_leaf_csv,
    read_leaf_csv,
)

__all__ = [
    "map_lines",
    "LeafTable",
    "format_matrix",
    "parse_matrix",
    "read_matrix",
    "write_matrix",
    "parse_problem",
    "load_problem",
    "write_leaf_csv",
    "read_leaf_csv",
]
