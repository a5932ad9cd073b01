"""
Pydantic schemas for the simulation designs
"""
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from stdml.core.constants import (
    SIM_BLOCK_NOISE_VAR,
    SIM_BLOCK_SIDE,
    SIM_BLOCK_TAU2,
    SIM_GAMMA,
    SIM_GRID_SIZE,
    SIM_NUM_COVARIATES,
    SIM_OBSERVED_COVARIATES,
    SIM_PIXEL_MISSING_FRAC,
    SIM_PIXEL_NOISE_VAR,
    SIM_RANGE,
)


class PixelSimConfig(BaseModel):
    """Pixel-level design: treatment and outcomes driven by five Matérn covariate fields"""

    model_config = ConfigDict(frozen=True)

    m: int = Field(default=SIM_GRID_SIZE, ge=2)
    rho: float = Field(default=SIM_RANGE, gt=0)
    nu: float = Field(default=2.0, gt=0)
    sigma2: float = Field(default=SIM_PIXEL_NOISE_VAR, ge=0)
    gamma: float = SIM_GAMMA
    p_observed: int = Field(default=SIM_OBSERVED_COVARIATES, ge=0, le=SIM_NUM_COVARIATES)
    missing_frac: float = Field(default=SIM_PIXEL_MISSING_FRAC)
    logit_temperature: float = Field(default=1.0, gt=0)  # logit = h1 / temperature
    seed: int = 0

    @field_validator("missing_frac")
    @classmethod
    def validate_missing_frac(cls, v: float) -> float:
        """Fraction of outcome cells masked, in [0, 1)"""
        if not 0.0 <= v < 1.0:
            raise ValueError("missing_frac must lie in [0, 1)")
        return v

    @property
    def scenario(self) -> str:
        return f"pixel-nu{self.nu:g}"

    def with_seed(self, seed: int):
        return self.model_copy(update={"seed": int(seed)})


class BlockSimConfig(PixelSimConfig):
    """Block-level design: treatment assigned per block, block random intercepts"""

    sigma2: float = Field(default=SIM_BLOCK_NOISE_VAR, ge=0)
    missing_frac: float = Field(default=0.0)
    block_side: int = Field(default=SIM_BLOCK_SIDE, ge=1)
    tau2: float = Field(default=SIM_BLOCK_TAU2, ge=0)

    @model_validator(mode="after")
    def check_tiling(self) -> "BlockSimConfig":
        if self.m % self.block_side != 0:
            raise ValueError(f"m={self.m} is not divisible by block_side={self.block_side}")
        return self

    @property
    def n_blocks(self) -> int:
        return (self.m // self.block_side) ** 2

    @property
    def scenario(self) -> str:
        return f"block-nu{self.nu:g}"
