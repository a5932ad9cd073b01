"""
Tests for Matérn correlation and Gaussian random field simulation
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.spatial.distance import cdist

from stdml.core.exceptions import ConfigurationError, DomainError
from stdml.services.field_service import GaussianFieldService
from stdml.services.lattice_service import LatticeService


def spec(rho=0.3, nu=2.0):
    return GaussianFieldService.make_spec(rho, nu)


class TestMatern:
    def test_zero_lag(self):
        assert GaussianFieldService.matern_correlation(0.0, spec()) == 1.0

    def test_exponential_case(self):
        value = GaussianFieldService.matern_correlation(0.3, spec(0.3, 0.5))
        assert value == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_three_halves_case(self):
        value = GaussianFieldService.matern_correlation(1.0, spec(1.0, 1.5))
        expected = (1 + np.sqrt(3)) * np.exp(-np.sqrt(3))
        assert value == pytest.approx(expected, rel=1e-12)
        assert value == pytest.approx(0.48286, abs=1e-5)

    @pytest.mark.parametrize("nu", [0.5, 1.0, 1.5, 2.0, 5.0])
    def test_nonincreasing(self, nu):
        d = np.linspace(0.0, 3.0, 400)
        values = GaussianFieldService.matern_correlation(d, spec(0.3, nu))
        assert values[0] == 1.0
        assert np.all(np.diff(values) <= 1e-12)
        assert np.all((values >= 0) & (values <= 1))

    def test_negative_distance(self):
        with pytest.raises(DomainError):
            GaussianFieldService.matern_correlation(-1.0, spec())

    @pytest.mark.parametrize("rho,nu", [(0.0, 1.0), (0.3, 0.0), (-1.0, 2.0)])
    def test_invalid_parameters(self, rho, nu):
        with pytest.raises(ConfigurationError):
            GaussianFieldService.make_spec(rho, nu)


class TestSampleField:
    def test_reproducible(self):
        grid = LatticeService.unit_square_grid(16)
        a = GaussianFieldService.sample_field(grid, spec(), seed=42)
        b = GaussianFieldService.sample_field(grid, spec(), seed=42)
        assert_array_equal(a.values, b.values)
        assert a.values.shape == (grid.n,)
        assert np.all(np.isfinite(a.values))

    def test_single_pixel_standard_normal(self):
        grid = LatticeService.build_grid(1, 1, 1.0)
        draws = np.array([GaussianFieldService.sample_field(grid, spec(), seed=s).values[0] for s in range(2000)])
        assert abs(draws.mean()) < 0.1
        assert 0.9 < draws.var() < 1.1

    def test_mean_and_variance(self):
        grid = LatticeService.unit_square_grid(32)
        s = spec(0.05, 0.5)
        pooled = np.concatenate([GaussianFieldService.sample_field(grid, s, seed=r).values for r in range(200)])
        assert abs(pooled.mean()) < 0.05
        assert 0.9 <= pooled.var() <= 1.1

    def test_lag_correlation(self):
        # spacing 0.1: a lag of three columns is exactly rho
        grid = LatticeService.build_grid(32, 32, 0.1)
        s = spec(0.3, 0.5)
        products = []
        for r in range(200):
            field = GaussianFieldService.sample_field(grid, s, seed=r).values.reshape(32, 32)
            products.append(np.mean(field[:, :-3] * field[:, 3:]))
        assert np.mean(products) == pytest.approx(np.exp(-1.0), abs=0.1)

    def test_circulant_matches_dense(self):
        grid = LatticeService.unit_square_grid(6)
        s = spec(0.3, 1.0)
        truth = GaussianFieldService.matern_correlation(cdist(grid.coords, grid.coords), s)
        reps = 4000
        circ = np.array([GaussianFieldService.sample_field(grid, s, r, method="circulant").values for r in range(reps)])
        chol = np.array([GaussianFieldService.sample_field(grid, s, r, method="cholesky").values for r in range(reps)])
        cov_circ = circ.T @ circ / reps
        cov_chol = chol.T @ chol / reps
        norm = np.linalg.norm(truth)
        assert np.linalg.norm(cov_circ - truth) / norm < 0.15
        assert np.linalg.norm(cov_chol - truth) / norm < 0.15
        assert np.linalg.norm(cov_circ - cov_chol) / norm < 0.15

    def test_cholesky_method_recorded(self):
        grid = LatticeService.unit_square_grid(4)
        sample = GaussianFieldService.sample_field(grid, spec(), 1, method="cholesky")
        assert sample.method == "cholesky"

    def test_unknown_method(self):
        with pytest.raises(ConfigurationError):
            GaussianFieldService.sample_field(LatticeService.unit_square_grid(4), spec(), 1, method="spectral")


class TestCovariates:
    def test_single_field_uses_sub_seed(self):
        grid = LatticeService.unit_square_grid(12)
        fields = GaussianFieldService.sample_covariates(grid, spec(), count=1, seed=9)
        direct = GaussianFieldService.sample_field(grid, spec(), GaussianFieldService.sub_seeds(9, 1)[0])
        assert_array_equal(fields[0].values, direct.values)

    def test_independent_fields(self):
        grid = LatticeService.unit_square_grid(32)
        correlations = []
        for r in range(200):
            fields = GaussianFieldService.sample_covariates(grid, spec(), count=5, seed=r)
            correlations.append(np.corrcoef(fields[0].values, fields[1].values)[0, 1])
        assert abs(np.mean(correlations)) < 0.1

    def test_observed_hidden_split(self):
        grid = LatticeService.unit_square_grid(8)
        fields = GaussianFieldService.sample_covariates(grid, spec(), count=5, seed=0)
        observed, hidden = GaussianFieldService.covariate_matrix(fields, observed=3)
        assert observed.shape == (grid.n, 3)
        assert hidden.shape == (grid.n, 2)
        assert_allclose(observed[:, 0], fields[0].values)
