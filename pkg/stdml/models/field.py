"""
Field model - one simulated Gaussian random field on a grid
"""
import numpy as np
from pydantic import BaseModel, ConfigDict

from stdml.schemas.field import MaternSpec


class FieldSample(BaseModel):
    """Values per pixel (array position order) with the spec and seed that produced them"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    spec: MaternSpec
    seed: int
    method: str = "circulant"  # or "cholesky"
