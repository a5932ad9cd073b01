"""
Monte Carlo summary models
"""
from typing import Any, Dict, List

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field


class MetricSummary(BaseModel):
    """Bias, MSE, mean CI length and coverage over replicates, with Monte Carlo standard errors"""

    model_config = ConfigDict(frozen=True)

    method: str
    bias: float
    mse: float
    ci_length: float
    coverage: float = Field(..., ge=0, le=1)
    n_replicates: int = Field(..., ge=0)
    n_failures: int = Field(default=0, ge=0)
    bias_se: float
    mse_se: float
    ci_length_se: float
    coverage_se: float


class SweepResult(BaseModel):
    """Summaries per method plus the per-replicate estimate log"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scenario: str
    gamma: float
    n_reps: int
    seed: int
    summaries: List[MetricSummary]
    replicates: pd.DataFrame  # replicate, method, gamma_hat, se, ci_lower, ci_upper, covered, dataset_hash, error
    config: Dict[str, Any] = Field(default_factory=dict)

    def summary(self, method: str) -> MetricSummary:
        for s in self.summaries:
            if s.method == method:
                return s
        raise KeyError(method)
