"""Positional encodings: fixed sinusoidal for text, learned row+column
tables for visual grid cells."""

from __future__ import annotations

import numpy as np

from ..engine.nn import sinusoidal_positions
from ..engine.ops import add, embedding_gather
from ..engine.tensor import Tensor
from ..errors import ConfigurationError, ContractViolation


def grid_indices(grid: int) -> tuple[np.ndarray, np.ndarray]:
    """Raster-order (row, col) index vectors of length grid*grid."""
    j = np.arange(grid * grid)
    return j // grid, j % grid


def visual_position_rows(row_table: Tensor, col_table: Tensor,
                         grid: int) -> Tensor:
    """(V, dim) encodings where cell (r, c) maps to row[r] + col[c]."""
    ridx, cidx = grid_indices(grid)
    return add(embedding_gather(row_table, ridx),
               embedding_gather(col_table, cidx))


def positional_encoding(kind: str, length_or_grid: int, dim: int,
                        row_table: Tensor = None, col_table: Tensor = None
                        ) -> Tensor:
    """Dispatch on encoding kind.

    "text-1d": sinusoidal rows for positions 0..length-1 (dim must be
    even). "visual-2d": learned row+column sums over a grid; requires
    the two tables.
    """
    if kind == "text-1d":
        if dim % 2 != 0:
            raise ConfigurationError(
                f"sinusoidal encoding needs even dim, got {dim}")
        return Tensor(sinusoidal_positions(length_or_grid, dim))
    if kind == "visual-2d":
        if row_table is None or col_table is None:
            raise ContractViolation("visual-2d encoding needs both tables")
        return visual_position_rows(row_table, col_table, length_or_grid)
    raise ConfigurationError(f"unknown positional-encoding kind {kind!r}")
