"""
Baseline service - unadjusted OLS, spatial difference-in-differences and naive DID
"""
import logging
from typing import Dict, Optional

import numpy as np

from stdml.core.exceptions import ShapeError
from stdml.models.dataset import GridDataset
from stdml.models.estimate import EffectEstimate
from stdml.models.lattice import Neighborhood
from stdml.services.lattice_service import LatticeService
from stdml.services.regression_service import RegressionService

logger = logging.getLogger(__name__)


class BaselineService:
    """Service class for regression baselines on the raw outcomes"""

    @staticmethod
    def _stacked(data: GridDataset, neighbor_treatment: Optional[np.ndarray]):
        d = data.d.astype(float)
        blocks = []
        responses = []
        for t in (0, 1):
            y = data.outcome(t)
            rows = ~np.isnan(y)
            ones = np.ones(rows.sum())
            cols = [ones, data.X[rows], t * ones, d[rows]]
            if neighbor_treatment is not None:
                cols.append(neighbor_treatment[rows])
            cols.append(t * d[rows])
            if neighbor_treatment is not None:
                cols.append(t * neighbor_treatment[rows])
            blocks.append(np.column_stack(cols))
            responses.append(y[rows])

        names = ["beta0", *data.covariate_names, "delta", "alpha"]
        if neighbor_treatment is not None:
            names.append("alpha_bar")
        names.append("gamma")
        if neighbor_treatment is not None:
            names.append("gamma_bar")
        return np.vstack(blocks), np.concatenate(responses), names

    @staticmethod
    def baseline_ols(data: GridDataset) -> EffectEstimate:
        """Y_it on (1, X_it, t, D_i, t D_i) with HC0 errors; gamma is the t D coefficient"""
        design, response, names = BaselineService._stacked(data, None)
        return RegressionService.fit_robust(design, response, names, "OLS")

    @staticmethod
    def baseline_did(data: GridDataset, nb: Neighborhood) -> EffectEstimate:
        """OLS plus neighbor treatment terms D-bar and t D-bar"""
        if nb.n != data.n:
            raise ShapeError("neighborhood does not match the dataset grid", expected=data.n, actual=nb.n)
        d_bar = LatticeService.neighbor_mean(data.d.astype(float), nb)
        design, response, names = BaselineService._stacked(data, d_bar)
        return RegressionService.fit_robust(design, response, names, "DID")

    @staticmethod
    def naive_did(
        mean_pre_treated: float,
        mean_pre_control: float,
        mean_post_treated: float,
        mean_post_control: float,
    ) -> float:
        """(post_T - post_C) - (pre_T - pre_C)"""
        return (mean_post_treated - mean_post_control) - (mean_pre_treated - mean_pre_control)

    @staticmethod
    def group_means(data: GridDataset) -> Dict[str, float]:
        """Observed-outcome means by period and treatment group, plus the naive DID"""
        treated = data.d == 1
        means = {}
        for label, t in (("pre", 0), ("post", 1)):
            y = data.outcome(t)
            for group, mask in (("treated", treated), ("control", ~treated)):
                values = y[mask & ~np.isnan(y)]
                means[f"{label}_{group}"] = float(values.mean()) if values.size else float("nan")
        means["naive_did"] = BaselineService.naive_did(
            means["pre_treated"], means["pre_control"], means["post_treated"], means["post_control"]
        )
        return means
