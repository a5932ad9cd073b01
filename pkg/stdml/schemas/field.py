"""
Pydantic schemas for Gaussian field simulation
"""
from pydantic import BaseModel, ConfigDict, Field


class MaternSpec(BaseModel):
    """Matérn correlation: range rho, smoothness nu, marginal variance"""

    model_config = ConfigDict(frozen=True)

    range: float = Field(..., gt=0, description="Range parameter rho")
    smoothness: float = Field(..., gt=0, description="Smoothness parameter nu")
    variance: float = Field(default=1.0, gt=0)
