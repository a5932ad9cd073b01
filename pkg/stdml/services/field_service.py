"""
Gaussian field service - Matérn correlation and exact simulation of stationary
Gaussian random fields on a grid (circulant embedding, dense Cholesky fallback)
"""
import logging
from typing import List, Tuple, Union

import numpy as np
from pydantic import ValidationError as PydanticValidationError
from scipy import linalg
from scipy.spatial.distance import cdist
from scipy.special import gammaln, kv

from stdml.core.constants import CHOLESKY_JITTERS, EMBEDDING_MAX_DOUBLINGS
from stdml.core.exceptions import ConfigurationError, DomainError, NumericalError
from stdml.models.field import FieldSample
from stdml.models.lattice import Grid
from stdml.schemas.field import MaternSpec

logger = logging.getLogger(__name__)


class GaussianFieldService:
    """Service class for Matérn Gaussian random fields"""

    @staticmethod
    def make_spec(rho: float, nu: float, variance: float = 1.0) -> MaternSpec:
        try:
            return MaternSpec(range=rho, smoothness=nu, variance=variance)
        except PydanticValidationError as exc:
            raise ConfigurationError(
                f"Invalid Matérn parameters (rho={rho}, nu={nu})",
                details={"errors": [e.get("msg") for e in exc.errors()]},
            ) from exc

    @staticmethod
    def matern_correlation(
        d: Union[float, np.ndarray],
        spec: MaternSpec,
    ) -> Union[float, np.ndarray]:
        """
        M(d) = 2^(1-nu)/Gamma(nu) x^nu K_nu(x) with x = sqrt(2 nu) d / rho, M(0) = 1.

        nu = 1/2 gives exp(-d/rho); nu = 3/2 gives (1 + sqrt(3) d/rho) exp(-sqrt(3) d/rho).
        """
        arr = np.asarray(d, dtype=float)
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise DomainError("Distance must be nonnegative", value=d)
        nu = spec.smoothness
        x = np.sqrt(2.0 * nu) * arr / spec.range
        positive = x > 0
        xs = np.where(positive, x, 1.0)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            log_scale = (1.0 - nu) * np.log(2.0) - gammaln(nu) + nu * np.log(xs)
            value = np.exp(log_scale) * kv(nu, xs)
        value = np.where(np.isfinite(value), value, 0.0)
        out = np.clip(np.where(positive, value, 1.0), 0.0, 1.0)
        return float(out) if np.ndim(d) == 0 else out

    @staticmethod
    def _embedding_eigenvalues(grid: Grid, spec: MaternSpec, n1: int, n2: int) -> np.ndarray:
        """Eigenvalues of the circulant embedding on an n2 x n1 torus"""
        k1 = np.arange(n1)
        k2 = np.arange(n2)
        h1 = np.minimum(k1, n1 - k1) * grid.spacing
        h2 = np.minimum(k2, n2 - k2) * grid.spacing
        hx, hy = np.meshgrid(h1, h2)
        base = spec.variance * GaussianFieldService.matern_correlation(np.hypot(hx, hy), spec)
        return np.real(np.fft.fft2(base))

    @staticmethod
    def circulant_embedding(grid: Grid, spec: MaternSpec) -> Union[np.ndarray, None]:
        """
        Square roots of the embedding eigenvalues, starting from 2x padding and
        doubling until nonnegative-definite. None if no embedding qualifies.
        """
        n1, n2 = 2 * grid.m_cols, 2 * grid.m_rows
        for attempt in range(EMBEDDING_MAX_DOUBLINGS + 1):
            lam = GaussianFieldService._embedding_eigenvalues(grid, spec, n1, n2)
            tol = 1e-10 * np.max(np.abs(lam))
            if lam.min() >= -tol:
                return np.sqrt(np.maximum(lam, 0.0))
            logger.debug(
                "Circulant embedding not nonnegative-definite; doubling",
                extra={"attempt": attempt, "size": (n2, n1), "min_eigenvalue": float(lam.min())},
            )
            n1, n2 = 2 * n1, 2 * n2
        return None

    @staticmethod
    def dense_cholesky(grid: Grid, spec: MaternSpec) -> np.ndarray:
        """Lower Cholesky factor of the full covariance, with jitter escalation"""
        coords = grid.coords
        cov = spec.variance * GaussianFieldService.matern_correlation(cdist(coords, coords), spec)
        last_error = None
        for jitter in CHOLESKY_JITTERS:
            try:
                return linalg.cholesky(cov + jitter * np.eye(grid.n), lower=True)
            except linalg.LinAlgError as exc:
                last_error = exc
        raise NumericalError(
            "Cholesky factorization failed after jitter escalation",
            details={
                "n": grid.n,
                "range": spec.range,
                "smoothness": spec.smoothness,
                "jitters": list(CHOLESKY_JITTERS),
                "reason": str(last_error),
            },
        )

    @staticmethod
    def sample_field(
        grid: Grid,
        spec: MaternSpec,
        seed: int,
        method: str = "auto",
    ) -> FieldSample:
        """One zero-mean draw with covariance variance * M(||s_i - s_j||)"""
        rng = np.random.default_rng(seed)
        if method not in ("auto", "circulant", "cholesky"):
            raise ConfigurationError(f"Unknown field simulation method '{method}'")

        lam_sqrt = None
        if method in ("auto", "circulant"):
            lam_sqrt = GaussianFieldService.circulant_embedding(grid, spec)
            if lam_sqrt is None:
                if method == "circulant":
                    raise NumericalError("No nonnegative-definite circulant embedding found")
                logger.warning(
                    "Circulant embedding failed; falling back to dense Cholesky",
                    extra={"n": grid.n, "smoothness": spec.smoothness},
                )

        if lam_sqrt is not None:
            white = rng.standard_normal(lam_sqrt.shape)
            field = np.real(np.fft.ifft2(lam_sqrt * np.fft.fft2(white)))
            values = field[:grid.m_rows, :grid.m_cols].ravel()
            used = "circulant"
        else:
            chol = GaussianFieldService.dense_cholesky(grid, spec)
            values = chol @ rng.standard_normal(grid.n)
            used = "cholesky"

        return FieldSample(values=np.ascontiguousarray(values), spec=spec, seed=int(seed), method=used)

    @staticmethod
    def sub_seeds(seed: int, count: int) -> List[int]:
        """Independent per-field seeds derived from a master seed"""
        return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]

    @staticmethod
    def sample_covariates(
        grid: Grid,
        spec: MaternSpec,
        count: int = 5,
        seed: int = 0,
        method: str = "auto",
    ) -> List[FieldSample]:
        """count independent fields, each from its own sub-seed"""
        if count < 1:
            raise ConfigurationError(f"count must be >= 1, got {count}")
        return [
            GaussianFieldService.sample_field(grid, spec, s, method=method)
            for s in GaussianFieldService.sub_seeds(seed, count)
        ]

    @staticmethod
    def covariate_matrix(
        fields: List[FieldSample],
        observed: int = 3,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """(observed n x p, hidden n x (count - p)) covariate matrices"""
        full = np.column_stack([f.values for f in fields])
        return full[:, :observed], full[:, observed:]
