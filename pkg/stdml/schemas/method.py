"""
Pydantic schemas for estimator configuration
"""
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from stdml.core.config import settings
from stdml.models.lattice import NeighborScheme
from stdml.models.method import CrossFitMode, EstimatorKind, FeatureSet, RandomEffectsMode
from stdml.schemas.learner import LearnerConfig


def _check_knots(features: FeatureSet, L: int) -> None:
    if features == FeatureSet.XSZ:
        side = int(round(np.sqrt(L)))
        if L < 4 or side * side != L:
            raise ValueError(f"XSZ needs L to be a perfect square >= 4, got L={L}")


def _check_folds(cf_mode: CrossFitMode, K: int) -> None:
    if cf_mode != CrossFitMode.NONE and K < 2:
        raise ValueError(f"cross-fitting needs K >= 2, got K={K}")


class StdmlConfig(BaseModel):
    """
    Options for one spatiotemporal DML fit.

    include_neighbors=None selects the neighbor-augmented second stage except under
    by-block cross-fitting, which uses the reduced regression.
    """

    model_config = ConfigDict(frozen=True)

    features: FeatureSet = FeatureSet.XSZ
    cf_mode: CrossFitMode = CrossFitMode.BY_PIXEL
    K: int = Field(default=settings.DEFAULT_FOLDS, ge=1)
    re_mode: RandomEffectsMode = RandomEffectsMode.NONE
    L: int = Field(default=settings.DEFAULT_KNOTS, ge=0)
    nb_scheme: NeighborScheme = NeighborScheme(settings.DEFAULT_NEIGHBOR_SCHEME)
    seed: int = 0
    include_neighbors: Optional[bool] = None
    drop_unneighbored: bool = False
    learner: LearnerConfig = Field(default_factory=LearnerConfig)

    @model_validator(mode="after")
    def check_options(self) -> "StdmlConfig":
        _check_knots(self.features, self.L)
        _check_folds(self.cf_mode, self.K)
        return self

    @property
    def neighbors_in_second_stage(self) -> bool:
        if self.include_neighbors is not None:
            return self.include_neighbors
        return self.cf_mode != CrossFitMode.BY_BLOCK

    @property
    def needs_blocks(self) -> bool:
        return self.cf_mode == CrossFitMode.BY_BLOCK or self.re_mode == RandomEffectsMode.BLOCK_RE


class MethodSpec(BaseModel):
    """One estimator in a Monte Carlo comparison"""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    kind: EstimatorKind
    features: FeatureSet = FeatureSet.XSZ
    cf_mode: CrossFitMode = CrossFitMode.BY_PIXEL
    re_mode: RandomEffectsMode = RandomEffectsMode.NONE
    L: int = Field(default=settings.DEFAULT_KNOTS, ge=0)
    K: int = Field(default=settings.DEFAULT_FOLDS, ge=1)
    include_neighbors: Optional[bool] = None

    @field_validator("name")
    @classmethod
    def validate_name(cls, v: str) -> str:
        """Names end up as CSV row labels"""
        if "," in v or "\n" in v:
            raise ValueError("method name must not contain commas or newlines")
        return v.strip()

    @model_validator(mode="after")
    def check_options(self) -> "MethodSpec":
        if self.kind == EstimatorKind.STDML:
            _check_knots(self.features, self.L)
            _check_folds(self.cf_mode, self.K)
        return self

    @property
    def needs_blocks(self) -> bool:
        return self.kind == EstimatorKind.STDML and (
            self.cf_mode == CrossFitMode.BY_BLOCK or self.re_mode == RandomEffectsMode.BLOCK_RE
        )

    def stdml_config(
        self,
        seed: int,
        learner: Optional[LearnerConfig] = None,
        nb_scheme: Optional[NeighborScheme] = None,
    ) -> StdmlConfig:
        return StdmlConfig(
            features=self.features,
            cf_mode=self.cf_mode,
            K=self.K,
            re_mode=self.re_mode,
            L=self.L,
            nb_scheme=nb_scheme or NeighborScheme(settings.DEFAULT_NEIGHBOR_SCHEME),
            seed=seed,
            include_neighbors=self.include_neighbors,
            learner=learner or LearnerConfig(),
        )
