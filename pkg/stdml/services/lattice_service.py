"""
Lattice service - grid construction, neighborhoods, block partitions,
neighbor means and the Wendland basis expansion
"""
import logging
from typing import Tuple, Union

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from stdml.core.constants import BANDWIDTH_MULTIPLIER
from stdml.core.exceptions import ConfigurationError, DomainError, ShapeError
from stdml.models.lattice import (
    BasisExpansion,
    BlockPartition,
    Grid,
    NeighborScheme,
    Neighborhood,
)

logger = logging.getLogger(__name__)

_OFFSETS = {
    NeighborScheme.ROOK4: [(-1, 0), (0, -1), (0, 1), (1, 0)],
    NeighborScheme.QUEEN8: [
        (-1, -1), (-1, 0), (-1, 1),
        (0, -1), (0, 1),
        (1, -1), (1, 0), (1, 1),
    ],
}


class LatticeService:
    """Service class for grid geometry"""

    @staticmethod
    def build_grid(
        m_rows: int,
        m_cols: int,
        spacing: float,
        origin: Tuple[float, float] = (0.0, 0.0),
    ) -> Grid:
        """Build a row-major grid with s_i = origin + spacing * (col, row)"""
        if int(m_rows) != m_rows or int(m_cols) != m_cols or m_rows < 1 or m_cols < 1:
            raise ConfigurationError(
                f"Grid dimensions must be positive integers, got {m_rows}x{m_cols}",
                details={"m_rows": m_rows, "m_cols": m_cols},
            )
        if not np.isfinite(spacing) or spacing <= 0:
            raise ConfigurationError(
                f"Grid spacing must be positive, got {spacing}",
                details={"spacing": spacing},
            )
        return Grid(
            m_rows=int(m_rows),
            m_cols=int(m_cols),
            spacing=float(spacing),
            origin=(float(origin[0]), float(origin[1])),
        )

    @staticmethod
    def unit_square_grid(m: int) -> Grid:
        """m x m grid spanning [0, 1]^2"""
        spacing = 1.0 / (m - 1) if m > 1 else 1.0
        return LatticeService.build_grid(m, m, spacing, (0.0, 0.0))

    @staticmethod
    def build_neighborhood(
        grid: Grid,
        scheme: Union[NeighborScheme, str] = NeighborScheme.QUEEN8,
    ) -> Neighborhood:
        """Adjacent pixels without wraparound; border pixels keep only in-grid neighbors"""
        scheme = NeighborScheme(scheme)
        rows, cols = grid.rows, grid.cols
        lists = [[] for _ in range(grid.n)]
        for dr, dc in _OFFSETS[scheme]:
            nr, nc = rows + dr, cols + dc
            valid = (nr >= 0) & (nr < grid.m_rows) & (nc >= 0) & (nc < grid.m_cols)
            for p in np.flatnonzero(valid):
                lists[p].append(nr[p] * grid.m_cols + nc[p])
        counts = np.array([len(x) for x in lists], dtype=np.int64)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        indices = np.array([j for x in lists for j in sorted(x)], dtype=np.int64)
        return Neighborhood(scheme=scheme, indptr=indptr, indices=indices)

    @staticmethod
    def adjacency_matrix(nb: Neighborhood) -> sparse.csr_matrix:
        data = np.ones(len(nb.indices), dtype=float)
        return sparse.csr_matrix((data, nb.indices, nb.indptr), shape=(nb.n, nb.n))

    @staticmethod
    def block_partition(grid: Grid, block_rows: int = 4, block_cols: int = 4) -> BlockPartition:
        """Tile the grid with contiguous block_rows x block_cols rectangles, labelled row-major"""
        if grid.m_rows % block_rows or grid.m_cols % block_cols:
            raise ConfigurationError(
                f"{grid.m_rows}x{grid.m_cols} grid cannot be tiled by "
                f"{block_rows}x{block_cols} blocks",
                details={"m_rows": grid.m_rows, "m_cols": grid.m_cols},
            )
        blocks_per_row = grid.m_cols // block_cols
        labels = (grid.rows // block_rows) * blocks_per_row + grid.cols // block_cols + 1
        G = (grid.m_rows // block_rows) * blocks_per_row
        return BlockPartition(labels=labels.astype(np.int64), G=G)

    @staticmethod
    def partition_from_labels(labels: np.ndarray) -> BlockPartition:
        """Relabel arbitrary integer block ids to 1..G (order of first appearance sorted by id)"""
        labels = np.asarray(labels)
        unique, inverse = np.unique(labels, return_inverse=True)
        return BlockPartition(labels=(inverse + 1).astype(np.int64), G=len(unique))

    @staticmethod
    def _neighbor_sums(values: np.ndarray, nb: Neighborhood) -> Tuple[np.ndarray, np.ndarray]:
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.shape[0] != nb.n:
            raise ShapeError(
                "neighbor_mean needs one value per pixel",
                expected=nb.n,
                actual=values.shape,
            )
        observed = ~np.isnan(values)
        adjacency = LatticeService.adjacency_matrix(nb)
        totals = adjacency @ np.where(observed, values, 0.0)
        counts = adjacency @ observed.astype(float)
        return totals, counts

    @staticmethod
    def neighbor_mean(values: np.ndarray, nb: Neighborhood) -> np.ndarray:
        """
        Mean of observed neighbor values per pixel (NaN = missing, excluded
        from numerator and denominator). Pixels without an observed neighbor get 0.
        """
        totals, counts = LatticeService._neighbor_sums(values, nb)
        isolated = counts == 0
        if isolated.any():
            logger.warning(
                f"{int(isolated.sum())} pixels have no observed neighbors; neighbor mean set to 0",
                extra={"isolated": int(isolated.sum())},
            )
        return np.where(isolated, 0.0, totals / np.where(isolated, 1.0, counts))

    @staticmethod
    def isolated_pixels(values: np.ndarray, nb: Neighborhood) -> np.ndarray:
        """Boolean flag per pixel: no observed neighbor"""
        _, counts = LatticeService._neighbor_sums(values, nb)
        return counts == 0

    @staticmethod
    def wendland_value(d: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Z = (1-d)^6 (36d^2 + 18d + 3)/3 for d <= 1, else 0 (d already scaled by phi)"""
        arr = np.asarray(d, dtype=float)
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise DomainError("Wendland distance must be nonnegative", value=d)
        inside = arr <= 1.0
        clipped = np.where(inside, arr, 1.0)
        out = np.where(
            inside,
            (1.0 - clipped) ** 6 * (36.0 * clipped ** 2 + 18.0 * clipped + 3.0) / 3.0,
            0.0,
        )
        return float(out) if np.ndim(d) == 0 else out

    @staticmethod
    def knot_lattice(grid: Grid, knots_per_side: int) -> Tuple[np.ndarray, float]:
        """
        Knots spanning the bounding box inclusive of edges, and the knot spacing.

        Axes are spaced independently; the returned spacing is the smaller positive
        one, so the isotropic bandwidth never exceeds the knot cell along the short axis.
        """
        if knots_per_side < 2:
            raise ConfigurationError(
                f"knots_per_side must be >= 2, got {knots_per_side}",
                details={"knots_per_side": knots_per_side},
            )
        xmin, ymin, xmax, ymax = grid.bounding_box
        xs = np.linspace(xmin, xmax, knots_per_side)
        ys = np.linspace(ymin, ymax, knots_per_side)
        axis_spacing = [span / (knots_per_side - 1) for span in (xmax - xmin, ymax - ymin) if span > 0]
        if not axis_spacing:
            raise ConfigurationError("Cannot place a knot lattice on a single-pixel grid")
        knot_spacing = min(axis_spacing)
        kx, ky = np.meshgrid(xs, ys)
        knots = np.column_stack([kx.ravel(), ky.ravel()])
        return knots, knot_spacing

    @staticmethod
    def build_basis(grid: Grid, knots_per_side: int) -> BasisExpansion:
        """Wendland features Z_il = wendland(||s_i - u_l|| / phi), phi = 2.5 x knot spacing"""
        knots, knot_spacing = LatticeService.knot_lattice(grid, knots_per_side)
        bandwidth = BANDWIDTH_MULTIPLIER * knot_spacing
        coords = grid.coords

        # compact support: only knots within phi contribute
        hits = cKDTree(knots).query_ball_point(coords, r=bandwidth)
        lengths = np.array([len(h) for h in hits], dtype=np.int64)
        rows = np.repeat(np.arange(grid.n), lengths)
        cols = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits]) if rows.size else rows
        dist = np.linalg.norm(coords[rows] - knots[cols], axis=1) / bandwidth

        features = np.zeros((grid.n, knots.shape[0]))
        features[rows, cols] = LatticeService.wendland_value(dist)
        logger.debug(
            f"Built {knots.shape[0]} Wendland features",
            extra={"L": knots.shape[0], "bandwidth": bandwidth},
        )
        return BasisExpansion(knots=knots, bandwidth=bandwidth, features=features)

    @staticmethod
    def knots_per_side_for(L: int) -> int:
        """Side of the square knot lattice with L knots"""
        side = int(round(np.sqrt(L)))
        if side * side != L or side < 2:
            raise ConfigurationError(
                f"Number of basis functions L={L} must be a perfect square >= 4",
                details={"L": L},
            )
        return side
