"""
Lattice models - grid geometry, neighborhoods, block partitions and the
Wendland spatial embedding

Pixel indices are 1-based and row-major (index i sits at row (i-1)//m_cols,
col (i-1)%m_cols). Arrays attached to a grid are indexed by position i-1.
"""
from enum import Enum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class NeighborScheme(str, Enum):
    """Pixel adjacency schemes"""
    QUEEN8 = "queen8"
    ROOK4 = "rook4"


class Grid(BaseModel):
    """Regular m_rows x m_cols lattice; s_i = origin + spacing * (col, row)"""

    model_config = ConfigDict(frozen=True)

    m_rows: int = Field(..., ge=1)
    m_cols: int = Field(..., ge=1)
    spacing: float = Field(..., gt=0)
    origin: Tuple[float, float] = (0.0, 0.0)

    @property
    def n(self) -> int:
        return self.m_rows * self.m_cols

    @property
    def rows(self) -> np.ndarray:
        """Row of every pixel, by array position"""
        return np.arange(self.n) // self.m_cols

    @property
    def cols(self) -> np.ndarray:
        """Column of every pixel, by array position"""
        return np.arange(self.n) % self.m_cols

    @property
    def coords(self) -> np.ndarray:
        """n x 2 coordinate matrix"""
        x = self.origin[0] + self.spacing * self.cols
        y = self.origin[1] + self.spacing * self.rows
        return np.column_stack([x, y]).astype(float)

    @property
    def bounding_box(self) -> Tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax)"""
        return (
            self.origin[0],
            self.origin[1],
            self.origin[0] + self.spacing * (self.m_cols - 1),
            self.origin[1] + self.spacing * (self.m_rows - 1),
        )

    def pixel_index(self, row: int, col: int) -> int:
        """1-based row-major index of (row, col)"""
        if not (0 <= row < self.m_rows and 0 <= col < self.m_cols):
            raise IndexError(f"cell ({row}, {col}) outside {self.m_rows}x{self.m_cols} grid")
        return row * self.m_cols + col + 1

    def pixel_position(self, index: int) -> Tuple[int, int]:
        """(row, col) of a 1-based pixel index"""
        if not 1 <= index <= self.n:
            raise IndexError(f"pixel index {index} outside 1..{self.n}")
        return divmod(index - 1, self.m_cols)

    def coordinate(self, index: int) -> Tuple[float, float]:
        """Coordinate s_i of a 1-based pixel index"""
        row, col = self.pixel_position(index)
        return (
            self.origin[0] + self.spacing * col,
            self.origin[1] + self.spacing * row,
        )


class Neighborhood(BaseModel):
    """
    Symmetric pixel adjacency in compressed form: neighbors of position p are
    indices[indptr[p]:indptr[p+1]] (0-based positions)
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scheme: NeighborScheme
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @property
    def counts(self) -> np.ndarray:
        """m_i per pixel"""
        return np.diff(self.indptr)

    def neighbors_of(self, position: int) -> np.ndarray:
        return self.indices[self.indptr[position]:self.indptr[position + 1]]


class BlockPartition(BaseModel):
    """Block labels g_i in 1..G, one per pixel"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    labels: np.ndarray
    G: int = Field(..., ge=1)

    def members(self, label: int) -> np.ndarray:
        """Array positions of the pixels in block `label`"""
        return np.flatnonzero(self.labels == label)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.G + 1)[1:]


class BasisExpansion(BaseModel):
    """Knot lattice u_1..u_L, bandwidth phi and features Z (n x L, values in [0, 1])"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    knots: np.ndarray
    bandwidth: float = Field(..., gt=0)
    features: np.ndarray

    @property
    def L(self) -> int:
        return self.knots.shape[0]
