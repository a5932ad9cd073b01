"""
Run configuration - flat key=value files with command-line overrides
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, field_validator

from stdml.core.config import settings
from stdml.core.constants import DEFAULT_KNOT_VALUES
from stdml.core.exceptions import ConfigurationError, UsageError
from stdml.models.lattice import NeighborScheme
from stdml.models.method import CrossFitMode, EstimatorKind, FeatureSet, RandomEffectsMode
from stdml.schemas.learner import LearnerConfig
from stdml.schemas.method import StdmlConfig
from stdml.schemas.simulation import BlockSimConfig, PixelSimConfig

logger = logging.getLogger(__name__)


def _split(v: Any) -> Any:
    if isinstance(v, str):
        return [item.strip() for item in v.split(",") if item.strip()]
    return v


class RunConfig(BaseModel):
    """
    Parameters shared by all verbs. Unset optional values fall back to the
    component defaults; `seed` is always required.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int

    # data
    data: Optional[str] = None
    output: Optional[str] = None
    truth_output: Optional[str] = None

    # simulation design
    design: str = "pixel"
    preset: Optional[str] = None
    m: Optional[int] = None
    rho: Optional[float] = None
    nu: Optional[float] = None
    sigma2: Optional[float] = None
    gamma: Optional[float] = None
    p_observed: Optional[int] = None
    missing_frac: Optional[float] = None
    logit_temperature: Optional[float] = None
    block_side: Optional[int] = None
    tau2: Optional[float] = None

    # sweep
    n_reps: int = Field(default=30, ge=2)
    with_oracle: bool = False

    # estimators
    methods: List[EstimatorKind] = Field(default_factory=lambda: [EstimatorKind.OLS, EstimatorKind.DID, EstimatorKind.STDML])
    features: FeatureSet = FeatureSet.XSZ
    cf_mode: CrossFitMode = CrossFitMode.BY_PIXEL
    K: int = Field(default=settings.DEFAULT_FOLDS, ge=1)
    re_mode: RandomEffectsMode = RandomEffectsMode.NONE
    L: int = Field(default=settings.DEFAULT_KNOTS, ge=0)
    L_values: List[int] = Field(default_factory=lambda: list(DEFAULT_KNOT_VALUES))
    nb_scheme: NeighborScheme = NeighborScheme(settings.DEFAULT_NEIGHBOR_SCHEME)
    include_neighbors: Optional[bool] = None
    drop_unneighbored: bool = False

    # learner
    n_trees: Optional[int] = Field(default=None, ge=1)
    burn_in: Optional[int] = Field(default=None, ge=0)
    kept_draws: Optional[int] = Field(default=None, ge=1)
    keep_every: Optional[int] = Field(default=None, ge=1)

    @field_validator("methods", mode="before")
    @classmethod
    def parse_methods(cls, v: Any) -> Any:
        """Comma-separated, any case"""
        v = _split(v)
        return [item.upper() if isinstance(item, str) else item for item in v]

    @field_validator("L_values", mode="before")
    @classmethod
    def parse_knot_values(cls, v: Any) -> Any:
        return _split(v)

    @field_validator("design")
    @classmethod
    def validate_design(cls, v: str) -> str:
        v = v.strip().lower()
        if v not in ("pixel", "block"):
            raise ValueError("design must be 'pixel' or 'block'")
        return v

    @field_validator("features", mode="before")
    @classmethod
    def parse_features(cls, v: Any) -> Any:
        return v.strip().upper() if isinstance(v, str) else v

    @classmethod
    def load(
        cls,
        path: Optional[Union[str, Path]] = None,
        overrides: Sequence[str] = (),
    ) -> "RunConfig":
        """Config file values, then `key=value` overrides, then validation"""
        values: Dict[str, Any] = {}
        path = path or settings.DEFAULT_RUN_CONFIG
        if path:
            if not Path(path).is_file():
                raise ConfigurationError(f"config file not found: {path}")
            values.update({k: v for k, v in dotenv_values(path).items() if v is not None})
        for item in overrides:
            key, sep, value = item.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"override '{item}' is not of the form key=value")
            values[key.strip()] = value.strip()
        logger.debug("Resolved run configuration", extra={"keys": sorted(values)})
        return cls(**values)

    def resolved(self) -> Dict[str, str]:
        """Flat string form of every set value, embedded in output headers"""
        out = {}
        for key, value in self.model_dump(mode="json").items():
            if value is None:
                continue
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            out[key] = str(value)
        return out

    def learner(self) -> LearnerConfig:
        overrides = {
            key: getattr(self, key)
            for key in ("n_trees", "burn_in", "kept_draws", "keep_every")
            if getattr(self, key) is not None
        }
        return LearnerConfig(seed=self.seed, **overrides)

    def scenario(self) -> Union[PixelSimConfig, BlockSimConfig]:
        fields = (
            "m", "rho", "nu", "sigma2", "gamma", "p_observed", "missing_frac", "logit_temperature",
        )
        values = {key: getattr(self, key) for key in fields if getattr(self, key) is not None}
        if self.design == "block":
            for key in ("block_side", "tau2"):
                if getattr(self, key) is not None:
                    values[key] = getattr(self, key)
            return BlockSimConfig(seed=self.seed, **values)
        return PixelSimConfig(seed=self.seed, **values)

    def scenario_overrides(self) -> Dict[str, Any]:
        """Design parameters set explicitly (applied on top of a preset scenario)"""
        fields = (
            "m", "rho", "nu", "sigma2", "gamma", "p_observed", "missing_frac", "logit_temperature",
            "block_side", "tau2",
        )
        return {key: getattr(self, key) for key in fields if getattr(self, key) is not None}

    def stdml_config(self, features: Optional[FeatureSet] = None, L: Optional[int] = None) -> StdmlConfig:
        return StdmlConfig(
            features=features or self.features,
            cf_mode=self.cf_mode,
            K=self.K,
            re_mode=self.re_mode,
            L=self.L if L is None else L,
            nb_scheme=self.nb_scheme,
            seed=self.seed,
            include_neighbors=self.include_neighbors,
            drop_unneighbored=self.drop_unneighbored,
            learner=self.learner(),
        )
