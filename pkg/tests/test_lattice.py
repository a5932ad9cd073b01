"""
Tests for grid geometry, neighborhoods, block partitions and the Wendland basis
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from stdml.core.exceptions import ConfigurationError, DomainError, ShapeError
from stdml.models.lattice import NeighborScheme
from stdml.services.lattice_service import LatticeService


class TestGrid:
    def test_single_pixel(self):
        grid = LatticeService.build_grid(1, 1, 1.0, (0.0, 0.0))
        assert grid.n == 1
        assert grid.coordinate(1) == (0.0, 0.0)

    def test_unit_square(self):
        grid = LatticeService.build_grid(32, 32, 1 / 31, (0.0, 0.0))
        assert grid.n == 1024
        assert_allclose(grid.bounding_box, (0.0, 0.0, 1.0, 1.0))

    def test_row_major_index(self):
        grid = LatticeService.build_grid(2, 3, 2.0, (1.0, 1.0))
        assert grid.pixel_position(4) == (1, 0)
        assert grid.coordinate(4) == (1.0, 3.0)

    def test_index_bijection(self):
        grid = LatticeService.build_grid(5, 7, 0.5, (2.0, -1.0))
        for i in range(1, grid.n + 1):
            assert grid.pixel_index(*grid.pixel_position(i)) == i
        assert len({tuple(c) for c in grid.coords}) == grid.n

    @pytest.mark.parametrize("m_rows,m_cols,spacing", [(0, 3, 1.0), (3, 3, 0.0), (3, 3, -1.0)])
    def test_invalid(self, m_rows, m_cols, spacing):
        with pytest.raises(ConfigurationError):
            LatticeService.build_grid(m_rows, m_cols, spacing)


class TestNeighborhood:
    @pytest.mark.parametrize("scheme", list(NeighborScheme))
    def test_symmetric_and_irreflexive(self, scheme):
        grid = LatticeService.build_grid(5, 6, 1.0)
        nb = LatticeService.build_neighborhood(grid, scheme)
        adjacency = LatticeService.adjacency_matrix(nb).toarray()
        assert_array_equal(adjacency, adjacency.T)
        assert np.all(np.diag(adjacency) == 0)

    def test_counts(self):
        grid = LatticeService.build_grid(4, 4, 1.0)
        queen = LatticeService.build_neighborhood(grid, NeighborScheme.QUEEN8)
        rook = LatticeService.build_neighborhood(grid, NeighborScheme.ROOK4)
        assert queen.counts[grid.pixel_index(0, 0) - 1] == 3
        assert queen.counts[grid.pixel_index(1, 1) - 1] == 8
        assert rook.counts[grid.pixel_index(0, 0) - 1] == 2
        assert rook.counts[grid.pixel_index(2, 2) - 1] == 4

    def test_ring_mean(self):
        grid = LatticeService.build_grid(3, 3, 1.0)
        nb = LatticeService.build_neighborhood(grid, "queen8")
        values = np.array([1, 0, 1, 0, 99, 0, 1, 0, 1], dtype=float)
        assert LatticeService.neighbor_mean(values, nb)[4] == pytest.approx(0.5)

    def test_rook_two_by_two(self):
        grid = LatticeService.build_grid(2, 2, 1.0)
        nb = LatticeService.build_neighborhood(grid, "rook4")
        assert_allclose(LatticeService.neighbor_mean(np.array([1.0, 2.0, 3.0, 4.0]), nb), 2.5)

    def test_constant(self):
        grid = LatticeService.build_grid(6, 5, 1.0)
        nb = LatticeService.build_neighborhood(grid)
        assert_allclose(LatticeService.neighbor_mean(np.full(grid.n, 3.25), nb), 3.25)

    def test_missing_excluded(self):
        grid = LatticeService.build_grid(1, 3, 1.0)
        nb = LatticeService.build_neighborhood(grid, "rook4")
        out = LatticeService.neighbor_mean(np.array([np.nan, 5.0, 1.0]), nb)
        assert_allclose(out, [5.0, 1.0, 5.0])

    def test_isolated_pixel_zero_filled(self):
        grid = LatticeService.build_grid(1, 2, 1.0)
        nb = LatticeService.build_neighborhood(grid, "rook4")
        values = np.array([np.nan, 2.0])
        assert_allclose(LatticeService.neighbor_mean(values, nb), [2.0, 0.0])
        assert_array_equal(LatticeService.isolated_pixels(values, nb), [False, True])

    def test_shape_mismatch(self):
        grid = LatticeService.build_grid(3, 3, 1.0)
        nb = LatticeService.build_neighborhood(grid)
        with pytest.raises(ShapeError):
            LatticeService.neighbor_mean(np.zeros(8), nb)

    @pytest.mark.parametrize("seed", range(100))
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        grid = LatticeService.build_grid(int(rng.integers(2, 9)), int(rng.integers(2, 9)), 1.0)
        nb = LatticeService.build_neighborhood(grid, list(NeighborScheme)[int(rng.integers(2))])
        v, w = rng.standard_normal((2, grid.n))
        a, b = rng.standard_normal(2)
        lhs = LatticeService.neighbor_mean(a * v + b * w, nb)
        rhs = a * LatticeService.neighbor_mean(v, nb) + b * LatticeService.neighbor_mean(w, nb)
        assert_allclose(lhs, rhs, atol=1e-12)


class TestBlocks:
    def test_four_by_four_tiling(self):
        grid = LatticeService.unit_square_grid(32)
        blocks = LatticeService.block_partition(grid, 4, 4)
        assert blocks.G == 64
        assert_array_equal(blocks.sizes(), 16)
        for g in (1, 17, 64):
            members = blocks.members(g)
            assert np.ptp(grid.rows[members]) == 3
            assert np.ptp(grid.cols[members]) == 3

    def test_untileable(self):
        with pytest.raises(ConfigurationError):
            LatticeService.block_partition(LatticeService.unit_square_grid(10), 4, 4)

    def test_relabel(self):
        blocks = LatticeService.partition_from_labels(np.array([7, 7, 3, 9]))
        assert blocks.G == 3
        assert_array_equal(blocks.labels, [2, 2, 1, 3])


class TestWendland:
    @pytest.mark.parametrize("d,expected", [(0.0, 1.0), (1.0, 0.0), (1.5, 0.0), (0.5, 7 / 64)])
    def test_values(self, d, expected):
        assert LatticeService.wendland_value(d) == pytest.approx(expected, abs=1e-15)

    def test_monotone(self):
        d = np.linspace(0.0, 1.0, 501)
        values = LatticeService.wendland_value(d)
        assert np.all(np.diff(values) <= 0)
        assert LatticeService.wendland_value(1.0 - 1e-9) == pytest.approx(0.0, abs=1e-12)

    def test_negative(self):
        with pytest.raises(DomainError):
            LatticeService.wendland_value(-0.1)


class TestBasis:
    def test_hundred_knots(self):
        grid = LatticeService.unit_square_grid(28)
        basis = LatticeService.build_basis(grid, 10)
        assert basis.L == 100
        assert basis.bandwidth == pytest.approx(2.5 / 9)
        # pixel (0, 0) coincides with the first knot
        assert basis.features[0, 0] == pytest.approx(1.0)
        assert np.all((basis.features >= 0) & (basis.features <= 1))

    def test_three_by_three_knots(self):
        grid = LatticeService.unit_square_grid(3)
        basis = LatticeService.build_basis(grid, 3)
        center = grid.pixel_index(1, 1) - 1
        assert basis.features[center, 4] == pytest.approx(1.0)
        corner = LatticeService.wendland_value(np.sqrt(0.5) / 1.25)
        assert_allclose(basis.features[center, [0, 2, 6, 8]], corner)

    @pytest.mark.parametrize("m,side", [(5, 2), (9, 3), (12, 4)])
    def test_sparsity_against_brute_force(self, m, side):
        grid = LatticeService.unit_square_grid(m)
        basis = LatticeService.build_basis(grid, side)
        dist = np.linalg.norm(grid.coords[:, None, :] - basis.knots[None, :, :], axis=2)
        expected = np.where(dist <= basis.bandwidth, LatticeService.wendland_value(dist / basis.bandwidth), 0.0)
        assert_allclose(basis.features, expected, atol=1e-14)
        assert np.all((basis.features > 0).sum(axis=1) <= (dist <= basis.bandwidth).sum(axis=1))
        assert np.all((basis.features > 0).sum(axis=1) >= 1)

    def test_rectangular_grid_uses_short_axis_spacing(self):
        grid = LatticeService.build_grid(4, 12, 1.0)
        knots, knot_spacing = LatticeService.knot_lattice(grid, 3)
        assert_allclose(np.unique(knots[:, 0]), [0.0, 5.5, 11.0])
        assert_allclose(np.unique(knots[:, 1]), [0.0, 1.5, 3.0])
        assert knot_spacing == pytest.approx(1.5)
        basis = LatticeService.build_basis(grid, 3)
        assert basis.bandwidth == pytest.approx(3.75)
        assert np.all((basis.features > 0).sum(axis=1) >= 1)

    def test_single_row_grid_ignores_flat_axis(self):
        grid = LatticeService.build_grid(1, 9, 1.0)
        _, knot_spacing = LatticeService.knot_lattice(grid, 3)
        assert knot_spacing == pytest.approx(4.0)

    def test_single_pixel_grid_has_no_lattice(self):
        with pytest.raises(ConfigurationError):
            LatticeService.knot_lattice(LatticeService.build_grid(1, 1, 1.0), 2)

    @pytest.mark.parametrize("L", [0, 1, 50, 99])
    def test_knots_per_side_rejects(self, L):
        with pytest.raises(ConfigurationError):
            LatticeService.knots_per_side_for(L)

    def test_knots_per_side(self):
        assert LatticeService.knots_per_side_for(196) == 14
