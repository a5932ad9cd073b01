"""
Tests for the OLS, spatial DID and naive DID baselines
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from stdml.core.exceptions import ShapeError, SingularityError
from stdml.models.estimate import EffectEstimate
from stdml.services.baseline_service import BaselineService
from stdml.services.lattice_service import LatticeService
from tests.conftest import make_dataset


class TestNaiveDid:
    def test_group_means_example(self):
        assert BaselineService.naive_did(0.037, 0.024, 0.162, 0.029) == pytest.approx(0.120, abs=1e-12)

    def test_no_change(self):
        assert BaselineService.naive_did(0.4, 0.4, 0.4, 0.4) == 0.0

    def test_unit_effect(self):
        assert BaselineService.naive_did(0.0, 0.0, 1.0, 0.0) == 1.0

    def test_group_means(self):
        data = make_dataset(m=4, seed=0).model_copy(update={
            "y0": np.arange(16.0),
            "y1": np.arange(16.0) + 1.0,
            "d": np.array([1, 0] * 8),
        })
        means = BaselineService.group_means(data)
        assert means["pre_treated"] == pytest.approx(7.0)
        assert means["pre_control"] == pytest.approx(8.0)
        assert means["post_treated"] == pytest.approx(8.0)
        assert means["naive_did"] == pytest.approx(0.0)


class TestOls:
    def test_noiseless_zero_effect(self):
        data = make_dataset(m=8, seed=1, p=2)
        y0 = 1.0 + data.X @ np.array([2.0, -1.0])
        clean = data.model_copy(update={"y0": y0, "y1": y0 + 0.5})
        estimate = BaselineService.baseline_ols(clean)
        assert estimate.coef_names == ["beta0", "X1", "X2", "delta", "alpha", "gamma"]
        assert estimate.gamma == pytest.approx(0.0, abs=1e-10)
        assert_allclose(estimate.coef, [1.0, 2.0, -1.0, 0.5, 0.0, 0.0], atol=1e-10)

    @pytest.mark.parametrize("seed", range(20))
    def test_saturated_model_matches_naive_did(self, seed):
        data = make_dataset(m=8, seed=seed, p=0, missing=0.2)
        estimate = BaselineService.baseline_ols(data)
        assert estimate.gamma == pytest.approx(BaselineService.group_means(data)["naive_did"], abs=1e-10)
        assert estimate.n_rows == int(data.mask0.sum() + data.mask1.sum())

    def test_recovers_effect(self):
        data = make_dataset(m=16, seed=2, gamma=2.0)
        estimate = BaselineService.baseline_ols(data)
        assert estimate.covers(2.0) or abs(estimate.gamma - 2.0) < 4 * estimate.se
        assert estimate.method == "OLS"


class TestSpatialDid:
    def test_terms(self):
        data = make_dataset(m=8, seed=3)
        nb = LatticeService.build_neighborhood(data.grid)
        estimate = BaselineService.baseline_did(data, nb)
        assert estimate.coef_names == ["beta0", "X1", "X2", "delta", "alpha", "alpha_bar", "gamma", "gamma_bar"]
        assert estimate.method == "DID"
        assert estimate.ci_lower < estimate.gamma < estimate.ci_upper

    def test_constant_treatment(self):
        data = make_dataset(m=8, seed=4)
        constant = data.model_copy(update={"d": np.ones(64, dtype=np.int64)})
        nb = LatticeService.build_neighborhood(data.grid)
        with pytest.raises(SingularityError):
            BaselineService.baseline_did(constant, nb)

    def test_neighborhood_mismatch(self):
        data = make_dataset(m=8)
        nb = LatticeService.build_neighborhood(LatticeService.unit_square_grid(4))
        with pytest.raises(ShapeError):
            BaselineService.baseline_did(data, nb)


class TestEstimateRecord:
    def test_record_restores_estimate(self):
        data = make_dataset(m=8, seed=5)
        estimate = BaselineService.baseline_did(data, LatticeService.build_neighborhood(data.grid))
        estimate = estimate.model_copy(update={"metadata": {"features": "XS", "K": 10}})
        restored = EffectEstimate.from_record(estimate.to_record())
        assert restored.method == "DID"
        assert restored.coef_names == estimate.coef_names
        assert restored.n_rows == estimate.n_rows
        assert restored.gamma == estimate.gamma
        assert_allclose(restored.coef, estimate.coef, rtol=0, atol=0)
        assert_allclose(restored.cov, estimate.cov, rtol=0, atol=0)
        assert restored.metadata == {"features": "XS", "K": "10"}

    def test_record_lines(self):
        data = make_dataset(m=8, seed=6)
        lines = BaselineService.baseline_ols(data).to_record().splitlines()
        assert lines[0] == "method=OLS"
        assert lines[1].startswith("n_rows=")
        assert "coef.gamma=" + repr(float(BaselineService.baseline_ols(data).gamma)) in lines
        assert sum(line.startswith("cov.") for line in lines) == 6 * 6
