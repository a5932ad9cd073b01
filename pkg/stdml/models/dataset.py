"""
Dataset models - gridded two-period data, fold assignments, first-stage
predictions and cross-fitted residual panels

Per-pixel arrays follow the grid's array positions. Missing outcomes are NaN.
"""
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from stdml.models.lattice import BlockPartition, Grid
from stdml.models.method import CrossFitMode


class GridDataset(BaseModel):
    """Outcomes Y0, Y1 (NaN = missing), binary treatment D, observed covariates X, optional blocks"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    y0: np.ndarray
    y1: np.ndarray
    d: np.ndarray
    X: np.ndarray  # n x p, no intercept column
    covariate_names: List[str] = Field(default_factory=list)
    blocks: Optional[BlockPartition] = None

    @model_validator(mode="after")
    def check_shapes(self) -> "GridDataset":
        n = self.grid.n
        for name in ("y0", "y1", "d"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have one value per pixel ({n})")
        if self.X.ndim != 2 or self.X.shape[0] != n:
            raise ValueError(f"X must be an n x p matrix with n = {n}")
        if len(self.covariate_names) != self.X.shape[1]:
            raise ValueError("covariate_names must name every column of X")
        if not np.all(np.isin(self.d, (0, 1))):
            raise ValueError("D must be binary and observed for every pixel")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("covariates must be finite")
        if self.blocks is not None and self.blocks.labels.shape != (n,):
            raise ValueError("block labels must cover every pixel")
        return self

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def mask0(self) -> np.ndarray:
        """True where Y0 is observed"""
        return ~np.isnan(self.y0)

    @property
    def mask1(self) -> np.ndarray:
        return ~np.isnan(self.y1)

    def outcome(self, t: int) -> np.ndarray:
        return self.y0 if t == 0 else self.y1

    def to_frame(self) -> pd.DataFrame:
        """One row per pixel: row, col, Y0, Y1, D, [block], covariates"""
        frame = pd.DataFrame({
            "row": self.grid.rows,
            "col": self.grid.cols,
            "Y0": self.y0,
            "Y1": self.y1,
            "D": self.d.astype(int),
        })
        if self.blocks is not None:
            frame["block"] = self.blocks.labels
        for j, name in enumerate(self.covariate_names):
            frame[name] = self.X[:, j]
        return frame


class FoldAssignment(BaseModel):
    """Fold label in 1..K per pixel, shared by all first-stage regressions"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    K: int = Field(..., ge=1)
    labels: np.ndarray
    mode: CrossFitMode

    def sizes(self) -> List[int]:
        return np.bincount(self.labels, minlength=self.K + 1)[1:].tolist()

    def train_mask(self, fold: int) -> np.ndarray:
        """Pixels used to train the models that predict `fold`"""
        if self.mode == CrossFitMode.NONE:
            return np.ones(len(self.labels), dtype=bool)
        return self.labels != fold

    def predict_mask(self, fold: int) -> np.ndarray:
        return self.labels == fold


class FirstStagePredictions(BaseModel):
    """Y0-hat, Y1-hat (NaN where Y_t is missing) and D-hat per pixel"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    y0_hat: np.ndarray
    y1_hat: np.ndarray
    d_hat: np.ndarray
    feature_names: List[str] = Field(default_factory=list)
    # target ("Y0", "Y1", "D") -> fold x feature split-count frame
    importance: Dict[str, Any] = Field(default_factory=dict)

    def mean_importance(self) -> pd.DataFrame:
        """Targets as rows, features as columns, averaged over folds"""
        rows = {target: frame.mean(axis=0) for target, frame in self.importance.items()}
        return pd.DataFrame(rows).T


class ResidualPanel(BaseModel):
    """Cross-fitted residuals feeding the second stage"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    r0: np.ndarray  # NaN where Y0 unobserved
    r1: np.ndarray
    rd: np.ndarray
    rd_bar: np.ndarray
    isolated: np.ndarray  # pixels without an observed neighbor

    @property
    def n(self) -> int:
        return len(self.rd)

    @property
    def diagnostics(self) -> Dict[str, int]:
        return {
            "isolated_pixels": int(self.isolated.sum()),
            "rows_t0": int((~np.isnan(self.r0)).sum()),
            "rows_t1": int((~np.isnan(self.r1)).sum()),
        }


class TruthRecord(BaseModel):
    """Ground truth behind a simulated dataset"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scenario: str
    gamma: float
    seed: int
    covariates: np.ndarray  # n x 5, observed columns first
    propensity: np.ndarray  # P(D_i = 1 | X)
    block_effects: Optional[np.ndarray] = None  # alpha_{g_i} per pixel
    oracle: FirstStagePredictions
    regenerations: int = 0
