"""
Method enums shared by datasets, estimators and the Monte Carlo harness
"""
from enum import Enum


class FeatureSet(str, Enum):
    """First-stage feature sets"""
    X = "X"  # covariates only
    XS = "XS"  # covariates + coordinates
    XSZ = "XSZ"  # covariates + coordinates + Wendland features


class CrossFitMode(str, Enum):
    """Fold allocation for cross-fitting"""
    NONE = "none"
    BY_PIXEL = "by_pixel"
    BY_BLOCK = "by_block"


class RandomEffectsMode(str, Enum):
    """Outcome learner random effects"""
    NONE = "none"
    BLOCK_RE = "block_re"


class EstimatorKind(str, Enum):
    """Estimators compared by the Monte Carlo harness"""
    OLS = "OLS"
    DID = "DID"
    STDML = "STDML"
    ORACLE = "ORACLE"
