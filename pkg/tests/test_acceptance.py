"""
Desk-scale Monte Carlo checks (slow; run with `pytest -m slow`)
"""
import numpy as np
import pytest

from stdml.core.constants import Z_CRIT_95
from stdml.models.method import CrossFitMode, EstimatorKind, FeatureSet
from stdml.schemas.learner import LearnerConfig
from stdml.schemas.method import MethodSpec
from stdml.schemas.simulation import BlockSimConfig, PixelSimConfig
from stdml.services.dml_service import DMLService
from stdml.services.monte_carlo_service import MonteCarloService
from stdml.services.simulation_service import SimulationService
from stdml.services.tree_learner_service import TreeLearnerService

pytestmark = pytest.mark.slow

DESK_LEARNER = LearnerConfig(n_trees=30, burn_in=50, kept_draws=100)
DESK_K = 5

OLS = MethodSpec(name="OLS", kind=EstimatorKind.OLS)
DID = MethodSpec(name="DID", kind=EstimatorKind.DID)
XS_CF = MethodSpec(name="DML - XS - CF", kind=EstimatorKind.STDML, features=FeatureSet.XS, K=DESK_K)
XSZ_CF = MethodSpec(name="DML - XSZ - CF", kind=EstimatorKind.STDML, features=FeatureSet.XSZ, K=DESK_K)
XSZ_NO_CF = MethodSpec(
    name="DML - XSZ", kind=EstimatorKind.STDML, features=FeatureSet.XSZ, cf_mode=CrossFitMode.NONE
)


def test_oracle_second_stage_is_unbiased():
    reps = 200
    estimates, covered = [], []
    for seed in range(reps):
        panel = SimulationService.simulate_oracle_panel(PixelSimConfig(m=32, seed=seed))
        estimate = DMLService.second_stage(panel)
        estimates.append(estimate.gamma)
        covered.append(estimate.covers(3.0))
    estimates = np.array(estimates)
    assert abs(estimates.mean() - 3.0) < 2 * estimates.std(ddof=1) / np.sqrt(reps)
    assert 0.89 <= np.mean(covered) <= 0.99


def test_learner_fits_outcome_surface():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(700, 5))
    truth = SimulationService.h2(1, x, 0)
    y = truth + rng.normal(size=700)
    model = TreeLearnerService.fit_continuous(x[:500], y[:500], LearnerConfig(n_trees=50, burn_in=100, kept_draws=100))
    pred = TreeLearnerService.predict(model, x[500:])
    held_out = truth[500:]
    r2 = 1 - np.sum((held_out - pred) ** 2) / np.sum((held_out - held_out.mean()) ** 2)
    assert r2 >= 0.7


@pytest.fixture(scope="module")
def pixel_sweep():
    methods = [OLS, DID, XS_CF, XSZ_CF, XSZ_NO_CF]
    return MonteCarloService.run_sweep(PixelSimConfig(m=32, nu=2.0), methods, n_reps=30, seed=2024, learner=DESK_LEARNER)


class TestPixelDesign:
    def test_no_failures_and_interval_lengths(self, pixel_sweep):
        for s in pixel_sweep.summaries:
            assert s.n_failures == 0
            se = pixel_sweep.replicates.query(f"method == '{s.method}'")["se"]
            assert s.ci_length == pytest.approx(2 * Z_CRIT_95 * se.mean())

    def test_spatial_basis_beats_baselines_on_bias(self, pixel_sweep):
        xsz = abs(pixel_sweep.summary(XSZ_CF.name).bias)
        assert xsz < abs(pixel_sweep.summary("DID").bias)
        assert xsz < abs(pixel_sweep.summary("OLS").bias)

    def test_spatial_basis_lowers_mse(self, pixel_sweep):
        assert pixel_sweep.summary(XSZ_CF.name).mse < pixel_sweep.summary(XS_CF.name).mse

    def test_cross_fitted_coverage(self, pixel_sweep):
        assert pixel_sweep.summary(XSZ_CF.name).coverage >= 0.80

    def test_no_cross_fitting_undercovers(self, pixel_sweep):
        assert pixel_sweep.summary(XSZ_NO_CF.name).coverage <= 0.30


def test_bias_shrinks_with_smoothness():
    bias = {}
    for nu in (1.0, 5.0):
        result = MonteCarloService.run_sweep(
            PixelSimConfig(m=32, nu=nu), [XSZ_CF], n_reps=20, seed=31, learner=DESK_LEARNER
        )
        bias[nu] = abs(result.summary(XSZ_CF.name).bias)
    assert bias[5.0] <= bias[1.0] + 0.15


@pytest.fixture(scope="module")
def block_sweep():
    methods = [OLS, DID] + [
        m for m in MonteCarloService.block_methods(K=DESK_K)
        if m.name in ("DML - no RE - no CF", "DML - no RE - pixel CF")
    ]
    return MonteCarloService.run_sweep(BlockSimConfig(m=32), methods, n_reps=30, seed=77, learner=DESK_LEARNER)


class TestBlockDesign:
    def test_pixel_cross_fitting_has_lowest_mse(self, block_sweep):
        pixel_cf = block_sweep.summary("DML - no RE - pixel CF").mse
        for other in ("OLS", "DID", "DML - no RE - no CF"):
            assert pixel_cf < block_sweep.summary(other).mse

    def test_pixel_cross_fitting_coverage(self, block_sweep):
        assert block_sweep.summary("DML - no RE - pixel CF").coverage >= 0.85


def test_block_preset_runs_every_method():
    scenario, methods = MonteCarloService.preset("block", L=16, K=2, with_oracle=True)
    scenario = BlockSimConfig(**{**scenario.model_dump(), "m": 16})
    result = MonteCarloService.run_sweep(scenario, methods, n_reps=5, seed=7, learner=DESK_LEARNER)
    assert [s.method for s in result.summaries] == [m.name for m in methods]
    assert all(np.isfinite(s.bias) for s in result.summaries)
    assert abs(result.summary("ORACLE").bias) < 1.0
