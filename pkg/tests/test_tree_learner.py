"""
Tests for the sum-of-trees learners
"""
import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError as PydanticValidationError
from scipy import stats
from scipy.special import expit

from stdml.core.exceptions import ConfigurationError, LearnerError, ShapeError
from stdml.schemas.learner import LearnerConfig
from stdml.services.tree_learner_service import TreeLearnerService


def features(n=200, q=3, seed=0):
    return np.random.default_rng(seed).uniform(-1, 1, (n, q))


class TestContinuous:
    def test_constant_response(self, fast_learner):
        X = features()
        model = TreeLearnerService.fit_continuous(X, np.full(200, 2.5), fast_learner)
        assert model.is_constant
        assert_array_equal(TreeLearnerService.predict(model, X[:7]), np.full(7, 2.5))
        importance = TreeLearnerService.variable_importance(model)
        assert (importance == 0).all()

    def test_deterministic(self, fast_learner):
        X = features(seed=1)
        y = 2 * X[:, 0] + np.random.default_rng(2).normal(0, 0.1, 200)
        a = TreeLearnerService.predict(TreeLearnerService.fit_continuous(X, y, fast_learner), X)
        b = TreeLearnerService.predict(TreeLearnerService.fit_continuous(X, y, fast_learner), X)
        assert_array_equal(a, b)

    def test_learns_signal(self, fast_learner):
        X = features(n=300, seed=3)
        rng = np.random.default_rng(4)
        y = 2 * X[:, 0] + X[:, 1] ** 2 + rng.normal(0, 0.2, 300)
        model = TreeLearnerService.fit_continuous(X, y, fast_learner)
        X_test = features(n=200, seed=5)
        truth = 2 * X_test[:, 0] + X_test[:, 1] ** 2
        pred = TreeLearnerService.predict(model, X_test)
        r2 = 1 - np.sum((truth - pred) ** 2) / np.sum((truth - truth.mean()) ** 2)
        assert r2 > 0.7

    @pytest.mark.parametrize("seed", range(5))
    def test_root_only_noise_posterior(self, seed):
        # single-leaf trees reduce the model to a normal mean with conjugate noise variance
        rng = np.random.default_rng(seed)
        n = 400
        X = rng.uniform(size=(n, 2))
        y = rng.normal(2.0, 1.5, n)
        cfg = LearnerConfig(n_trees=5, burn_in=50, kept_draws=400, split_prob_base=0.0, seed=seed)
        model = TreeLearnerService.fit_continuous(X, y, cfg)
        assert model.split_counts.sum() == 0
        nu, lam = model.sigma_prior_df, model.sigma_prior_scale
        S = float(np.sum((y - y.mean()) ** 2))
        expected = (nu * lam + S) / (nu + n - 3)
        assert model.sigma_draws.mean() == pytest.approx(expected, rel=0.05)

    def test_response_scale_equivariance(self, fast_learner):
        X = features(seed=16)
        y = 2 * X[:, 0] + np.random.default_rng(17).normal(0, 0.2, 200)
        base = TreeLearnerService.predict(TreeLearnerService.fit_continuous(X, y, fast_learner), X)
        scaled = TreeLearnerService.predict(TreeLearnerService.fit_continuous(X, 10 * y, fast_learner), X)
        rel_rms = np.sqrt(np.mean((scaled - 10 * base) ** 2)) / np.sqrt(np.mean((10 * base) ** 2))
        assert rel_rms < 0.05

    def test_duplicated_noise_column(self):
        rng = np.random.default_rng(18)
        X = features(n=300, q=2, seed=19)
        y = 3.0 * (X[:, 0] > 0) + rng.normal(0, 0.1, 300)
        cfg = LearnerConfig(n_trees=50, burn_in=100, kept_draws=200, seed=20)
        pred = TreeLearnerService.predict(TreeLearnerService.fit_continuous(X, y, cfg), X)
        widened = np.column_stack([X, X[:, 1]])
        pred_widened = TreeLearnerService.predict(TreeLearnerService.fit_continuous(widened, y, cfg), widened)
        assert np.sqrt(np.mean((pred - pred_widened) ** 2)) < 0.1 * y.std()

    def test_importance_finds_signal(self, fast_learner):
        X = features(seed=6)
        y = 3.0 * (X[:, 0] > 0) + np.random.default_rng(7).normal(0, 0.1, 200)
        model = TreeLearnerService.fit_continuous(X, y, fast_learner, feature_names=["X1", "X2", "X3"])
        importance = TreeLearnerService.variable_importance(model)
        assert list(importance.index) == ["X1", "X2", "X3"]
        assert (importance >= 0).all()
        assert importance.idxmax() == "X1"

    def test_grouped_importance(self, fast_learner):
        X = features(seed=8)
        y = X[:, 0] + X[:, 2]
        model = TreeLearnerService.fit_continuous(X, y, fast_learner, feature_names=["X1", "z1", "z2"])
        raw = TreeLearnerService.variable_importance(model)
        grouped = TreeLearnerService.variable_importance(model, groups={"spatial": ["z1", "z2"]})
        assert list(grouped.index) == ["X1", "spatial"]
        assert grouped["spatial"] == pytest.approx(raw["z1"] + raw["z2"])

    def test_dataframe_names(self, fast_learner):
        frame = pd.DataFrame(features(seed=9), columns=["a", "b", "c"])
        model = TreeLearnerService.fit_continuous(frame, frame["a"].to_numpy() * 2, fast_learner)
        assert model.feature_names == ["a", "b", "c"]

    def test_dump_model(self, fast_learner):
        X = features(n=50, seed=10)
        model = TreeLearnerService.fit_continuous(X, X[:, 0], fast_learner.model_copy(update={"kept_draws": 1}))
        text = TreeLearnerService.dump_model(model)
        lines = text.splitlines()
        assert lines[0] == "# kind=continuous"
        assert lines[1] == "# features=x1,x2,x3"
        assert lines[3] == "draw tree node var cut left right value"
        roots = [line for line in lines[4:] if line.split()[2] == "0"]
        assert len(roots) == fast_learner.n_trees


class TestBinary:
    def test_probabilities(self, fast_learner):
        X = features(seed=11)
        d = (np.random.default_rng(12).random(200) < 0.5).astype(int)
        model = TreeLearnerService.fit_binary(X, d, fast_learner)
        pred = TreeLearnerService.predict(model, X)
        assert np.all((pred > 0) & (pred < 1))
        assert pred.mean() == pytest.approx(0.5, abs=0.1)

    def test_held_out_auc(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(1000, 3))
        d = (rng.random(1000) < expit(4.0 * X[:, 0])).astype(int)
        cfg = LearnerConfig(n_trees=50, burn_in=100, kept_draws=100, seed=21)
        model = TreeLearnerService.fit_binary(X[:500], d[:500], cfg)
        pred, test = TreeLearnerService.predict(model, X[500:]), d[500:]
        positives, negatives = pred[test == 1], pred[test == 0]
        auc = stats.mannwhitneyu(positives, negatives).statistic / (len(positives) * len(negatives))
        assert auc >= 0.9

    def test_monotone_in_single_feature(self):
        x = np.random.default_rng(22).uniform(-1, 1, (300, 1))
        d = (x[:, 0] > 0).astype(int)
        cfg = LearnerConfig(n_trees=50, burn_in=100, kept_draws=100, seed=23)
        model = TreeLearnerService.fit_binary(x, d, cfg)
        pred = TreeLearnerService.predict(model, np.linspace(-1, 1, 101)[:, None])
        # pairs (i < j) on the increasing grid where the prediction drops by more than 0.05
        drops = pred[:, None] > pred[None, :] + 0.05
        violations = np.triu(drops, k=1).sum()
        assert violations < 0.05 * (101 * 100 / 2)

    def test_single_class(self, fast_learner):
        with pytest.raises(LearnerError) as exc:
            TreeLearnerService.fit_binary(features(), np.ones(200), fast_learner)
        assert exc.value.target == "D"

    def test_non_binary(self, fast_learner):
        with pytest.raises(ConfigurationError):
            TreeLearnerService.fit_binary(features(), np.full(200, 2.0), fast_learner)


class TestRandomEffects:
    def test_shapes_and_unseen_blocks(self, fast_learner):
        rng = np.random.default_rng(14)
        X = features(n=160, seed=15)
        labels = np.repeat(np.arange(1, 11), 16)
        effects_true = rng.normal(0, 1.0, 10)
        y = X[:, 0] + effects_true[labels - 1] + rng.normal(0, 0.3, 160)
        model, effects = TreeLearnerService.fit_continuous_re(X, y, labels, fast_learner)
        assert_array_equal(effects.block_ids, np.arange(1, 11))
        assert effects.intercept_draws.shape == (fast_learner.kept_draws, 10)
        assert effects.variance_draws.shape == (fast_learner.kept_draws,)
        assert np.all(effects.variance_draws > 0)
        assert_allclose(effects.intercepts_for(np.array([99])), [0.0])

        marginal = TreeLearnerService.predict(model, X[:3])
        conditional = TreeLearnerService.predict(model, X[:3], effects, labels[:3])
        assert_allclose(conditional - marginal, effects.intercepts_for(labels[:3]))

    def test_zero_block_variance(self):
        rng = np.random.default_rng(24)
        labels = np.repeat(np.arange(1, 65), 16)
        X = rng.uniform(-1, 1, (1024, 2))
        y = X[:, 0] + rng.normal(0, 0.5, 1024)
        cfg = LearnerConfig(n_trees=10, burn_in=50, kept_draws=100, seed=25)
        _, effects = TreeLearnerService.fit_continuous_re(X, y, labels, cfg)
        assert effects.variance_draws.mean() < 0.1

    def test_recovers_block_shifts(self):
        rng = np.random.default_rng(26)
        labels = np.repeat(np.arange(1, 65), 16)
        alpha = rng.normal(0, 1.0, 64)
        X = rng.uniform(-1, 1, (1024, 2))
        y = alpha[labels - 1] + rng.normal(0, 0.1, 1024)
        cfg = LearnerConfig(n_trees=10, burn_in=50, kept_draws=100, seed=27)
        _, effects = TreeLearnerService.fit_continuous_re(X, y, labels, cfg)
        assert np.corrcoef(effects.intercept_means, alpha)[0, 1] > 0.8

    def test_single_block_matches_plain_fit(self):
        rng = np.random.default_rng(28)
        X = features(n=300, q=2, seed=29)
        y = 3.0 * (X[:, 0] > 0) + rng.normal(0, 0.1, 300)
        labels = np.ones(300, dtype=np.int64)
        cfg = LearnerConfig(n_trees=50, burn_in=100, kept_draws=200, seed=30)
        plain = TreeLearnerService.predict(TreeLearnerService.fit_continuous(X, y, cfg), X)
        model, effects = TreeLearnerService.fit_continuous_re(X, y, labels, cfg)
        with_intercept = TreeLearnerService.predict(model, X, effects, labels)
        assert np.sqrt(np.mean((plain - with_intercept) ** 2)) < 0.05 * y.std()

    def test_label_length(self, fast_learner):
        with pytest.raises(ShapeError):
            TreeLearnerService.fit_continuous_re(features(), np.zeros(200) + np.arange(200), np.ones(10), fast_learner)


class TestInputs:
    def test_response_length(self, fast_learner):
        with pytest.raises(ShapeError):
            TreeLearnerService.fit_continuous(features(), np.arange(10.0), fast_learner)

    def test_no_features(self, fast_learner):
        with pytest.raises(ConfigurationError):
            TreeLearnerService.fit_continuous(np.zeros((50, 0)), np.arange(50.0), fast_learner)

    def test_too_few_rows(self, fast_learner):
        with pytest.raises(ConfigurationError):
            TreeLearnerService.fit_continuous(features(n=5), np.arange(5.0), fast_learner)

    def test_missing_values(self, fast_learner):
        y = np.arange(50.0)
        y[3] = np.nan
        with pytest.raises(ConfigurationError):
            TreeLearnerService.fit_continuous(features(n=50), y, fast_learner)

    def test_predict_schema(self, fast_learner):
        X = features(n=50)
        model = TreeLearnerService.fit_continuous(X, X[:, 0], fast_learner)
        with pytest.raises(ShapeError):
            TreeLearnerService.predict(model, X[:, :2])

    def test_invalid_split_probability(self):
        with pytest.raises(PydanticValidationError):
            LearnerConfig(split_prob_base=1.0)
