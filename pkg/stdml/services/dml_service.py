"""
DML service - fold allocation, cross-fitted first stage, residuals and the
neighbor-augmented second-stage regression
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from stdml.core.config import settings
from stdml.core.exceptions import (
    ConfigurationError,
    LearnerError,
    ShapeError,
    SingularityError,
    StdmlException,
)
from stdml.models.dataset import FirstStagePredictions, FoldAssignment, GridDataset, ResidualPanel
from stdml.models.estimate import EffectEstimate
from stdml.models.lattice import Neighborhood
from stdml.models.method import CrossFitMode, FeatureSet, RandomEffectsMode
from stdml.schemas.learner import LearnerConfig
from stdml.schemas.method import StdmlConfig
from stdml.services.lattice_service import LatticeService
from stdml.services.regression_service import RegressionService
from stdml.services.tree_learner_service import TreeLearnerService

logger = logging.getLogger(__name__)

TARGETS = ("Y0", "Y1", "D")
FULL_TERMS = ["beta", "delta", "alpha", "alpha_bar", "gamma", "gamma_bar"]
REDUCED_TERMS = ["beta", "delta", "alpha", "gamma"]


def _task_seed(seed: int, target: str, fold: int) -> int:
    """Seed for one (target, fold) learner, independent of scheduling"""
    ss = np.random.SeedSequence([int(seed), TARGETS.index(target), int(fold)])
    return int(ss.generate_state(1)[0])


def _fit_task(task: Dict[str, Any]) -> Tuple[str, int, np.ndarray, pd.Series]:
    """Fit one first-stage learner and predict its held-out rows (runs in worker processes)"""
    target, fold = task["target"], task["fold"]
    cfg = task["cfg"]
    names = task["feature_names"]
    try:
        if target == "D":
            model = TreeLearnerService.fit_binary(task["X_train"], task["y_train"], cfg, names)
            pred = TreeLearnerService.predict(model, task["X_pred"])
        elif task["blocks_train"] is not None:
            model, effects = TreeLearnerService.fit_continuous_re(
                task["X_train"], task["y_train"], task["blocks_train"], cfg, names
            )
            pred = TreeLearnerService.predict(model, task["X_pred"], effects, task["blocks_pred"])
        else:
            model = TreeLearnerService.fit_continuous(task["X_train"], task["y_train"], cfg, names)
            pred = TreeLearnerService.predict(model, task["X_pred"])
    except LearnerError as exc:
        raise LearnerError(f"fold {fold}, target {target}: {exc.message}", fold=fold, target=target) from exc
    except (StdmlException, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise LearnerError(f"fold {fold}, target {target}: {exc}", fold=fold, target=target) from exc
    return target, fold, pred, TreeLearnerService.variable_importance(model)


class DMLService:
    """Service class for spatiotemporal double machine learning"""

    @staticmethod
    def assign_folds(data: GridDataset, K: int, mode: CrossFitMode, seed: int) -> FoldAssignment:
        """Random near-equal folds over pixels or whole blocks"""
        mode = CrossFitMode(mode)
        if mode == CrossFitMode.NONE:
            return FoldAssignment(K=1, labels=np.ones(data.n, dtype=np.int64), mode=mode)
        if K < 2:
            raise ConfigurationError(f"cross-fitting needs K >= 2, got K={K}")

        rng = np.random.default_rng(seed)
        if mode == CrossFitMode.BY_PIXEL:
            if K > data.n:
                raise ConfigurationError(f"K={K} exceeds the number of pixels ({data.n})")
            labels = np.empty(data.n, dtype=np.int64)
            labels[rng.permutation(data.n)] = np.arange(data.n) % K + 1
        else:
            if data.blocks is None:
                raise ConfigurationError("by_block cross-fitting needs a block partition")
            G = data.blocks.G
            if K > G:
                raise ConfigurationError(f"K={K} exceeds the number of blocks ({G})")
            block_fold = np.empty(G, dtype=np.int64)
            block_fold[rng.permutation(G)] = np.arange(G) % K + 1
            labels = block_fold[data.blocks.labels - 1]
        return FoldAssignment(K=K, labels=labels, mode=mode)

    @staticmethod
    def build_features(
        data: GridDataset,
        features: FeatureSet,
        L: int = 0,
    ) -> Tuple[np.ndarray, List[str], List[str]]:
        """
        First-stage design: covariates, then coordinates (XS, XSZ), then L Wendland
        features (XSZ). Returns (matrix, names, names of the spatial columns).
        """
        features = FeatureSet(features)
        columns = [data.X]
        names = list(data.covariate_names)
        spatial: List[str] = []
        if features in (FeatureSet.XS, FeatureSet.XSZ):
            columns.append(data.grid.coords)
            spatial += ["s_x", "s_y"]
        if features == FeatureSet.XSZ:
            basis = LatticeService.build_basis(data.grid, LatticeService.knots_per_side_for(L))
            columns.append(basis.features)
            spatial += [f"z{j + 1}" for j in range(basis.L)]
        names += spatial
        matrix = np.column_stack(columns) if names else np.empty((data.n, 0))
        if matrix.shape[1] == 0:
            raise ConfigurationError("feature set X needs at least one covariate")
        return matrix, names, spatial

    @staticmethod
    def _tasks(
        data: GridDataset,
        folds: FoldAssignment,
        matrix: np.ndarray,
        names: List[str],
        re_mode: RandomEffectsMode,
        cfg: LearnerConfig,
    ) -> List[Dict[str, Any]]:
        use_re = RandomEffectsMode(re_mode) == RandomEffectsMode.BLOCK_RE
        if use_re and data.blocks is None:
            raise ConfigurationError("block random effects need a block partition")
        tasks = []
        for fold in range(1, folds.K + 1):
            train = folds.train_mask(fold)
            held_out = folds.predict_mask(fold)
            for target in TARGETS:
                if target == "D":
                    rows, response = train, data.d.astype(float)
                    pred_rows = held_out
                else:
                    y = data.outcome(0 if target == "Y0" else 1)
                    observed = ~np.isnan(y)
                    rows, response = train & observed, y
                    pred_rows = held_out & observed
                blocks = use_re and target != "D"
                tasks.append({
                    "target": target,
                    "fold": fold,
                    "cfg": cfg.with_seed(_task_seed(cfg.seed, target, fold)),
                    "feature_names": names,
                    "X_train": matrix[rows],
                    "y_train": response[rows],
                    "X_pred": matrix[pred_rows],
                    "pred_rows": pred_rows,
                    "blocks_train": data.blocks.labels[rows] if blocks else None,
                    "blocks_pred": data.blocks.labels[pred_rows] if blocks else None,
                })
        return tasks

    @staticmethod
    def first_stage(
        data: GridDataset,
        folds: FoldAssignment,
        features: FeatureSet,
        re_mode: RandomEffectsMode = RandomEffectsMode.NONE,
        L: int = 0,
        cfg: Optional[LearnerConfig] = None,
        max_workers: Optional[int] = None,
    ) -> FirstStagePredictions:
        """
        Y0, Y1 and D regressions. Each fold is predicted by models trained on the
        other folds (all pixels when cross-fitting is off). Missing outcomes are
        excluded from training and stay NaN in the predictions.

        `max_workers` overrides settings.MAX_WORKERS; sweep workers pass 1.
        """
        cfg = cfg or LearnerConfig()
        matrix, names, _ = DMLService.build_features(data, features, L)
        tasks = DMLService._tasks(data, folds, matrix, names, re_mode, cfg)
        pred_rows = [task.pop("pred_rows") for task in tasks]

        limit = settings.MAX_WORKERS if max_workers is None else max_workers
        workers = min(limit, len(tasks))
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_fit_task, tasks))
        else:
            results = [_fit_task(task) for task in tasks]

        out = {target: np.full(data.n, np.nan) for target in TARGETS}
        importance: Dict[str, Dict[int, pd.Series]] = {target: {} for target in TARGETS}
        for (target, fold, pred, counts), rows in zip(results, pred_rows):
            out[target][rows] = pred
            importance[target][fold] = counts
            logger.debug(
                f"First stage {target} fold {fold} done",
                extra={"target": target, "fold": fold, "n_pred": int(rows.sum())},
            )

        frames = {
            target: pd.DataFrame(by_fold).T.reindex(columns=names).rename_axis("fold")
            for target, by_fold in importance.items()
        }
        return FirstStagePredictions(
            y0_hat=out["Y0"],
            y1_hat=out["Y1"],
            d_hat=out["D"],
            feature_names=names,
            importance=frames,
        )

    @staticmethod
    def residuals(
        data: GridDataset,
        predictions: FirstStagePredictions,
        nb: Neighborhood,
    ) -> ResidualPanel:
        """R^Y_t = Y_t - Yhat_t on observed cells, R^D = D - Dhat, and its neighbor mean"""
        for name in ("y0_hat", "y1_hat", "d_hat"):
            values = getattr(predictions, name)
            if values.shape != (data.n,):
                raise ShapeError(f"{name} is not aligned with the dataset", expected=(data.n,), actual=values.shape)
        if nb.n != data.n:
            raise ShapeError("neighborhood does not match the dataset grid", expected=data.n, actual=nb.n)

        r0 = np.where(data.mask0, data.y0 - predictions.y0_hat, np.nan)
        r1 = np.where(data.mask1, data.y1 - predictions.y1_hat, np.nan)
        rd = data.d.astype(float) - predictions.d_hat
        if np.any(np.isnan(rd)):
            raise ShapeError("treatment predictions are missing for some pixels")
        isolated = LatticeService.isolated_pixels(rd, nb)
        return ResidualPanel(
            r0=r0,
            r1=r1,
            rd=rd,
            rd_bar=LatticeService.neighbor_mean(rd, nb),
            isolated=isolated,
        )

    @staticmethod
    def second_stage_design(
        panel: ResidualPanel,
        include_neighbors: bool = True,
        drop_unneighbored: bool = False,
    ) -> Tuple[np.ndarray, np.ndarray, List[str]]:
        """Stacked (design, response, column names): t=0 rows then t=1 rows"""
        keep = ~panel.isolated if drop_unneighbored else np.ones(panel.n, dtype=bool)
        blocks = []
        responses = []
        for t, r in ((0, panel.r0), (1, panel.r1)):
            rows = keep & ~np.isnan(r)
            if not rows.any():
                raise SingularityError(f"no observed residuals in period {t}", columns=["delta"])
            rd, rd_bar = panel.rd[rows], panel.rd_bar[rows]
            ones = np.ones(rows.sum())
            cols = [ones, t * ones, rd]
            if include_neighbors:
                cols.append(rd_bar)
            cols.append(t * rd)
            if include_neighbors:
                cols.append(t * rd_bar)
            blocks.append(np.column_stack(cols))
            responses.append(r[rows])
        names = FULL_TERMS if include_neighbors else REDUCED_TERMS
        return np.vstack(blocks), np.concatenate(responses), list(names)

    @staticmethod
    def second_stage(
        panel: ResidualPanel,
        include_neighbors: bool = True,
        drop_unneighbored: bool = False,
        method: str = "STDML",
        metadata: Optional[Dict[str, Any]] = None,
    ) -> EffectEstimate:
        """Least squares of R^Y on (1, t, R^D, [R^D-bar], t R^D, [t R^D-bar]) with HC0 errors"""
        design, response, names = DMLService.second_stage_design(panel, include_neighbors, drop_unneighbored)
        meta = dict(metadata or {})
        meta.update(panel.diagnostics)
        meta["include_neighbors"] = include_neighbors
        if drop_unneighbored:
            meta["dropped_pixels"] = int(panel.isolated.sum())
        return RegressionService.fit_robust(design, response, names, method, metadata=meta)

    @staticmethod
    def run_stdml(
        data: GridDataset,
        config: StdmlConfig,
        predictions: Optional[FirstStagePredictions] = None,
        method: str = "STDML",
        max_workers: Optional[int] = None,
    ) -> EffectEstimate:
        """Folds, first stage, residuals and second stage; `predictions` skips the first stage"""
        estimate, _ = DMLService.run_with_predictions(data, config, predictions, method, max_workers)
        return estimate

    @staticmethod
    def run_with_predictions(
        data: GridDataset,
        config: StdmlConfig,
        predictions: Optional[FirstStagePredictions] = None,
        method: str = "STDML",
        max_workers: Optional[int] = None,
    ) -> Tuple[EffectEstimate, FirstStagePredictions]:
        """run_stdml that also returns the first-stage predictions (for importance tables)"""
        if config.needs_blocks and data.blocks is None:
            raise ConfigurationError(
                "by_block cross-fitting and block random effects need a block partition",
                details={"cf_mode": config.cf_mode.value, "re_mode": config.re_mode.value},
            )
        nb = LatticeService.build_neighborhood(data.grid, config.nb_scheme)
        fold_seed, learner_seed = (int(s) for s in np.random.SeedSequence(config.seed).generate_state(2))

        meta: Dict[str, Any] = {
            "seed": config.seed,
            "features": config.features.value,
            "cf_mode": config.cf_mode.value,
            "K": config.K,
            "re_mode": config.re_mode.value,
            "L": config.L if config.features == FeatureSet.XSZ else 0,
            "nb_scheme": config.nb_scheme.value,
        }
        if predictions is None:
            folds = DMLService.assign_folds(data, config.K, config.cf_mode, fold_seed)
            predictions = DMLService.first_stage(
                data,
                folds,
                config.features,
                config.re_mode,
                config.L,
                config.learner.with_seed(learner_seed),
                max_workers=max_workers,
            )
            meta["fold_sizes"] = ";".join(str(s) for s in folds.sizes())
        else:
            meta["first_stage"] = "supplied"

        panel = DMLService.residuals(data, predictions, nb)
        estimate = DMLService.second_stage(
            panel,
            include_neighbors=config.neighbors_in_second_stage,
            drop_unneighbored=config.drop_unneighbored,
            method=method,
            metadata=meta,
        )
        logger.info(
            f"{method}: gamma={estimate.gamma:.4f} (se {estimate.se:.4f})",
            extra={"method": method, "seed": config.seed, "n_rows": estimate.n_rows},
        )
        return estimate, predictions
