"""
Tree learner service - first-stage sum-of-trees learners behind a uniform interface:
continuous responses, binary responses (probit link) and continuous responses with
block random intercepts
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats
from scipy.special import ndtr

from stdml.core.constants import RE_PRIOR_SCALE, RE_PRIOR_SHAPE
from stdml.core.exceptions import ConfigurationError, LearnerError, ShapeError
from stdml.models.lattice import BlockPartition
from stdml.models.tree import RandomEffectsFit, TreeEnsembleModel
from stdml.schemas.learner import LearnerConfig
from stdml.services.bart_sampler import BartSampler, route

logger = logging.getLogger(__name__)

MIN_TRAINING_ROWS = 10


def _feature_names(features: Union[np.ndarray, pd.DataFrame], names: Optional[Sequence[str]]) -> List[str]:
    if names is not None:
        return list(names)
    if isinstance(features, pd.DataFrame):
        return [str(c) for c in features.columns]
    return [f"x{j + 1}" for j in range(np.asarray(features).shape[1])]


def _check_inputs(features, response) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(features, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2:
        raise ShapeError("features must be a 2-d matrix", expected="n x q", actual=X.shape)
    if X.shape[1] == 0:
        raise ConfigurationError("At least one feature column is required (q = 0)")
    if y.shape != (X.shape[0],):
        raise ShapeError("response length must match feature rows", expected=X.shape[0], actual=y.shape)
    if X.shape[0] < MIN_TRAINING_ROWS:
        raise ConfigurationError(
            f"At least {MIN_TRAINING_ROWS} training rows are required, got {X.shape[0]}",
            details={"n": X.shape[0]},
        )
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ConfigurationError("Training rows must be complete; filter missing rows first")
    return X, y


def _noise_prior(X: np.ndarray, y_scaled: np.ndarray, cfg: LearnerConfig) -> Tuple[float, float]:
    """(sigma_hat^2, lambda) on the scaled response; sigma_hat from a linear fit when n > q + 1"""
    n, q = X.shape
    if n > q + 1:
        design = np.column_stack([np.ones(n), X])
        coef, *_ = np.linalg.lstsq(design, y_scaled, rcond=None)
        resid = y_scaled - design @ coef
        sigma_hat2 = float(resid @ resid) / (n - q - 1)
    else:
        sigma_hat2 = float(np.var(y_scaled, ddof=1))
    sigma_hat2 = max(sigma_hat2, 1e-12)
    lam = sigma_hat2 * stats.chi2.ppf(1.0 - cfg.noise_quantile, cfg.noise_df) / cfg.noise_df
    return sigma_hat2, lam


class TreeLearnerService:
    """Service class for sum-of-trees learners"""

    @staticmethod
    def _constant_model(kind: str, names: List[str], value: float) -> TreeEnsembleModel:
        logger.warning(
            "Constant response; returning a constant predictor",
            extra={"kind": kind, "value": value},
        )
        empty_int = np.zeros(0, dtype=np.int64)
        return TreeEnsembleModel(
            kind=kind,
            feature_names=names,
            node_var=empty_int,
            node_cut=np.zeros(0),
            node_left=empty_int,
            node_right=empty_int,
            node_value=np.zeros(0),
            roots=np.zeros((0, 0), dtype=np.int64),
            split_counts=np.zeros((1, len(names))),
            constant=float(value),
        )

    @staticmethod
    def _continuous_transform(y: np.ndarray) -> Tuple[float, float]:
        """shift, scale with y = shift + scale * y_scaled and y_scaled in [-0.5, 0.5]"""
        lo, hi = float(y.min()), float(y.max())
        return lo + 0.5 * (hi - lo), hi - lo

    @staticmethod
    def _build_model(kind: str, names: List[str], draws: Dict[str, np.ndarray], **extra) -> TreeEnsembleModel:
        return TreeEnsembleModel(
            kind=kind,
            feature_names=names,
            node_var=draws["node_var"],
            node_cut=draws["node_cut"],
            node_left=draws["node_left"],
            node_right=draws["node_right"],
            node_value=draws["node_value"],
            roots=draws["roots"],
            split_counts=draws["split_counts"],
            **extra,
        )

    @staticmethod
    def fit_continuous(
        features: Union[np.ndarray, pd.DataFrame],
        y: np.ndarray,
        cfg: Optional[LearnerConfig] = None,
        feature_names: Optional[Sequence[str]] = None,
    ) -> TreeEnsembleModel:
        """Sum-of-trees regression for a continuous response"""
        cfg = cfg or LearnerConfig()
        names = _feature_names(features, feature_names)
        X, y = _check_inputs(features, y)
        if np.ptp(y) == 0:
            return TreeLearnerService._constant_model("continuous", names, float(y[0]))

        shift, scale = TreeLearnerService._continuous_transform(y)
        y_scaled = (y - shift) / scale
        m = cfg.trees_for(binary=False)
        sigma_hat2, lam = _noise_prior(X, y_scaled, cfg)

        sampler = BartSampler(
            X,
            y_scaled,
            cfg,
            leaf_sd=0.5 / (cfg.leaf_shrinkage * np.sqrt(m)),
            sigma2=sigma_hat2,
            noise_df=cfg.noise_df,
            noise_scale=lam,
        )
        draws = sampler.run()
        return TreeLearnerService._build_model(
            "continuous",
            names,
            draws,
            shift=shift,
            scale=scale,
            sigma_draws=draws["sigma2"] * scale ** 2,
            sigma_prior_df=cfg.noise_df,
            sigma_prior_scale=lam * scale ** 2,
        )

    @staticmethod
    def fit_binary(
        features: Union[np.ndarray, pd.DataFrame],
        d: np.ndarray,
        cfg: Optional[LearnerConfig] = None,
        feature_names: Optional[Sequence[str]] = None,
    ) -> TreeEnsembleModel:
        """Probit sum-of-trees classifier via latent-variable augmentation"""
        cfg = cfg or LearnerConfig()
        names = _feature_names(features, feature_names)
        X, d = _check_inputs(features, d)
        if not np.all(np.isin(d, (0.0, 1.0))):
            raise ConfigurationError("Binary response must contain only 0 and 1")
        if d.min() == d.max():
            raise LearnerError(
                "Binary response has a single class; handle the degenerate treatment "
                "before fitting (all pixels treated or all untreated)",
                target="D",
            )

        m = cfg.trees_for(binary=True)
        offset = float(stats.norm.ppf(d.mean()))
        sampler = BartSampler(
            X,
            d.astype(int),
            cfg,
            binary=True,
            leaf_sd=3.0 / (cfg.leaf_shrinkage * np.sqrt(m)),
            offset=offset,
        )
        draws = sampler.run()
        return TreeLearnerService._build_model("binary", names, draws, shift=offset, scale=1.0)

    @staticmethod
    def fit_continuous_re(
        features: Union[np.ndarray, pd.DataFrame],
        y: np.ndarray,
        blocks: Union[BlockPartition, np.ndarray],
        cfg: Optional[LearnerConfig] = None,
        feature_names: Optional[Sequence[str]] = None,
    ) -> Tuple[TreeEnsembleModel, RandomEffectsFit]:
        """
        Sum-of-trees regression plus block random intercepts alpha_g ~ Normal(0, tau^2),
        tau^2 ~ inverse-gamma(1, 1) in response units
        """
        cfg = cfg or LearnerConfig()
        names = _feature_names(features, feature_names)
        X, y = _check_inputs(features, y)
        labels = blocks.labels if isinstance(blocks, BlockPartition) else np.asarray(blocks)
        if labels.shape != y.shape:
            raise ShapeError("every row needs a block label", expected=y.shape, actual=labels.shape)

        if np.ptp(y) == 0:
            model = TreeLearnerService._constant_model("continuous", names, float(y[0]))
            block_ids = np.unique(labels)
            return model, RandomEffectsFit(
                block_ids=block_ids,
                intercept_draws=np.zeros((1, len(block_ids))),
                variance_draws=np.full(1, RE_PRIOR_SCALE / RE_PRIOR_SHAPE),
            )

        shift, scale = TreeLearnerService._continuous_transform(y)
        y_scaled = (y - shift) / scale
        m = cfg.trees_for(binary=False)
        sigma_hat2, lam = _noise_prior(X, y_scaled, cfg)

        sampler = BartSampler(
            X,
            y_scaled,
            cfg,
            leaf_sd=0.5 / (cfg.leaf_shrinkage * np.sqrt(m)),
            sigma2=sigma_hat2,
            noise_df=cfg.noise_df,
            noise_scale=lam,
            blocks=labels,
            re_shape=RE_PRIOR_SHAPE,
            re_scale=RE_PRIOR_SCALE / scale ** 2,
        )
        draws = sampler.run()
        model = TreeLearnerService._build_model(
            "continuous",
            names,
            draws,
            shift=shift,
            scale=scale,
            sigma_draws=draws["sigma2"] * scale ** 2,
            sigma_prior_df=cfg.noise_df,
            sigma_prior_scale=lam * scale ** 2,
        )
        effects = RandomEffectsFit(
            block_ids=draws["block_ids"],
            intercept_draws=draws["alpha"] * scale,
            variance_draws=draws["re_var"] * scale ** 2,
        )
        return model, effects

    @staticmethod
    def predict(
        model: TreeEnsembleModel,
        features_new: Union[np.ndarray, pd.DataFrame],
        effects: Optional[RandomEffectsFit] = None,
        blocks: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """
        Posterior-mean predictions (probabilities for binary models).

        With `effects` and `blocks`, the posterior-mean block intercepts are added
        for blocks seen in training; otherwise the marginal mean structure is returned.
        """
        X = np.asarray(features_new, dtype=float)
        if X.ndim != 2 or X.shape[1] != model.n_features:
            raise ShapeError(
                "feature schema does not match the training schema",
                expected=model.n_features,
                actual=X.shape,
            )
        if model.is_constant:
            return np.full(X.shape[0], model.constant)

        arrays = (model.node_var, model.node_cut, model.node_left, model.node_right, model.node_value)
        total = np.zeros(X.shape[0])
        for draw in range(model.n_draws):
            fx = route(arrays, model.roots[draw], X)
            if model.kind == "binary":
                total += ndtr(model.shift + fx)
            else:
                total += fx
        mean = total / model.n_draws
        if model.kind == "binary":
            return mean
        pred = model.shift + model.scale * mean
        if effects is not None and blocks is not None:
            pred = pred + effects.intercepts_for(blocks)
        return pred

    @staticmethod
    def variable_importance(
        model: TreeEnsembleModel,
        groups: Optional[Dict[str, Sequence[str]]] = None,
    ) -> pd.Series:
        """
        Average number of internal nodes splitting on each feature per kept draw.
        `groups` maps a reported name to feature names whose counts are summed.
        """
        counts = pd.Series(model.split_counts.mean(axis=0), index=model.feature_names, dtype=float)
        if not groups:
            return counts
        grouped = {}
        members = set()
        for name, cols in groups.items():
            grouped[name] = float(counts[list(cols)].sum()) if len(cols) else 0.0
            members.update(cols)
        rest = {name: float(counts[name]) for name in model.feature_names if name not in members}
        return pd.Series({**rest, **grouped}, dtype=float)

    @staticmethod
    def dump_model(model: TreeEnsembleModel) -> str:
        """
        Text serialization for debugging. Header lines start with '#'; one line per
        node: draw tree node var cut left right value (node ids local to the tree).
        """
        lines = [
            f"# kind={model.kind}",
            f"# features={','.join(model.feature_names)}",
            f"# shift={model.shift!r} scale={model.scale!r}",
        ]
        if model.is_constant:
            lines.append(f"# constant={model.constant!r}")
            return "\n".join(lines) + "\n"
        lines.append("draw tree node var cut left right value")
        for draw in range(model.n_draws):
            for tree in range(model.n_trees):
                root = int(model.roots[draw, tree])
                stack = [root]
                while stack:
                    node = stack.pop(0)
                    var = int(model.node_var[node])
                    left = int(model.node_left[node])
                    right = int(model.node_right[node])
                    lines.append(
                        f"{draw} {tree} {node - root} {var} {model.node_cut[node]!r} "
                        f"{left - root if left >= 0 else -1} {right - root if right >= 0 else -1} "
                        f"{model.node_value[node]!r}"
                    )
                    if var >= 0:
                        stack.extend([left, right])
        return "\n".join(lines) + "\n"
