"""
Regression service - least squares by pivoted QR with HC0 sandwich covariance
"""
import logging
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy import linalg

from stdml.core.constants import Z_CRIT_95
from stdml.core.exceptions import ShapeError, SingularityError
from stdml.models.estimate import EffectEstimate

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-10


class RegressionService:
    """Service class for robust least squares"""

    @staticmethod
    def hc0_covariance(design: np.ndarray, residuals: np.ndarray, bread: np.ndarray) -> np.ndarray:
        """(Z'Z)^-1 Z' diag(e^2) Z (Z'Z)^-1"""
        scores = design * residuals[:, None]
        meat = scores.T @ scores
        cov = bread @ meat @ bread
        return 0.5 * (cov + cov.T)

    @staticmethod
    def fit_robust(
        design: np.ndarray,
        response: np.ndarray,
        names: Sequence[str],
        method: str,
        effect: str = "gamma",
        metadata: Optional[Dict[str, Any]] = None,
    ) -> EffectEstimate:
        """Least-squares coefficients, HC0 covariance and a 95% normal interval for `effect`"""
        Z = np.asarray(design, dtype=float)
        y = np.asarray(response, dtype=float)
        names = list(names)
        if Z.ndim != 2 or Z.shape[0] != y.shape[0] or Z.shape[1] != len(names):
            raise ShapeError(
                "design, response and column names disagree",
                expected=(y.shape[0], len(names)),
                actual=Z.shape,
            )

        k = Z.shape[1]
        Q, R, piv = linalg.qr(Z, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > RANK_TOLERANCE * diag[0])) if diag.size and diag[0] > 0 else 0
        if Z.shape[0] < k or rank < k:
            collinear = [names[j] for j in piv[rank:]]
            raise SingularityError(
                f"Design matrix is rank deficient (rank {rank} < {k}); "
                f"collinear columns: {', '.join(collinear)}",
                columns=collinear,
            )

        coef = np.empty(k)
        coef[piv] = linalg.solve_triangular(R, Q.T @ y)
        r_inv = linalg.solve_triangular(R, np.eye(k))
        bread = np.empty((k, k))
        bread[np.ix_(piv, piv)] = r_inv @ r_inv.T

        residuals = y - Z @ coef
        cov = RegressionService.hc0_covariance(Z, residuals, bread)

        idx = names.index(effect)
        gamma = float(coef[idx])
        se = float(np.sqrt(max(cov[idx, idx], 0.0)))
        logger.debug(
            f"{method}: gamma={gamma:.4f} se={se:.4f}",
            extra={"method": method, "n_rows": Z.shape[0]},
        )
        return EffectEstimate(
            method=method,
            coef_names=names,
            coef=coef,
            cov=cov,
            gamma=gamma,
            se=se,
            ci_lower=gamma - Z_CRIT_95 * se,
            ci_upper=gamma + Z_CRIT_95 * se,
            n_rows=int(Z.shape[0]),
            metadata=dict(metadata or {}),
        )
