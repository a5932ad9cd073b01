"""
Pydantic schemas for first-stage tree learners
"""
from typing import Optional
from pydantic import BaseModel, ConfigDict, Field, field_validator

from stdml.core.constants import (
    CUTPOINT_GRID_SIZE,
    DEFAULT_BURN_IN,
    DEFAULT_KEPT_DRAWS,
    DEFAULT_LEAF_SHRINKAGE,
    DEFAULT_NOISE_DF,
    DEFAULT_NOISE_QUANTILE,
    DEFAULT_SPLIT_PROB_BASE,
    DEFAULT_SPLIT_PROB_POWER,
    DEFAULT_TREES_BINARY,
    DEFAULT_TREES_CONTINUOUS,
)


class LearnerConfig(BaseModel):
    """
    Sum-of-trees learner settings.

    n_trees=None picks the default for the response type (200 continuous, 50 binary).
    split_prob_base=0 constrains every tree to a single leaf.
    """

    model_config = ConfigDict(frozen=True)

    n_trees: Optional[int] = Field(default=None, ge=1)
    burn_in: int = Field(default=DEFAULT_BURN_IN, ge=0)
    kept_draws: int = Field(default=DEFAULT_KEPT_DRAWS, ge=1)
    keep_every: int = Field(default=1, ge=1)
    split_prob_base: float = Field(default=DEFAULT_SPLIT_PROB_BASE)
    split_prob_power: float = Field(default=DEFAULT_SPLIT_PROB_POWER, ge=0)
    leaf_shrinkage: float = Field(default=DEFAULT_LEAF_SHRINKAGE, gt=0)
    noise_df: float = Field(default=DEFAULT_NOISE_DF, gt=0)
    noise_quantile: float = Field(default=DEFAULT_NOISE_QUANTILE, gt=0, lt=1)
    cutpoint_grid: int = Field(default=CUTPOINT_GRID_SIZE, ge=1)
    seed: int = 0

    @field_validator("split_prob_base")
    @classmethod
    def validate_split_prob_base(cls, v: float) -> float:
        """alpha_T in [0, 1)"""
        if not 0.0 <= v < 1.0:
            raise ValueError("split_prob_base must lie in [0, 1)")
        return v

    def trees_for(self, binary: bool) -> int:
        if self.n_trees is not None:
            return self.n_trees
        return DEFAULT_TREES_BINARY if binary else DEFAULT_TREES_CONTINUOUS

    def with_seed(self, seed: int) -> "LearnerConfig":
        return self.model_copy(update={"seed": int(seed)})
