"""
Domain constants - non-environment default values
These are statistical defaults, not configuration
"""

# Normal critical value for 95% intervals
Z_CRIT_95 = 1.959964

# Tree learner defaults
DEFAULT_TREES_CONTINUOUS = 200
DEFAULT_TREES_BINARY = 50
DEFAULT_BURN_IN = 100
DEFAULT_KEPT_DRAWS = 1000
DEFAULT_SPLIT_PROB_BASE = 0.95
DEFAULT_SPLIT_PROB_POWER = 2.0
DEFAULT_LEAF_SHRINKAGE = 2.0
DEFAULT_NOISE_DF = 3.0
DEFAULT_NOISE_QUANTILE = 0.90
CUTPOINT_GRID_SIZE = 100
MOVE_PROBABILITIES = {"grow": 0.25, "prune": 0.25, "change": 0.5}

# Random-effect variance prior (inverse gamma, original response units)
RE_PRIOR_SHAPE = 1.0
RE_PRIOR_SCALE = 1.0

# Wendland bandwidth as a multiple of the knot spacing
BANDWIDTH_MULTIPLIER = 2.5

# Circulant embedding
EMBEDDING_MAX_DOUBLINGS = 3
CHOLESKY_JITTERS = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)

# Simulation designs
SIM_GRID_SIZE = 32
SIM_RANGE = 0.3
SIM_GAMMA = 3.0
SIM_NUM_COVARIATES = 5
SIM_OBSERVED_COVARIATES = 3
SIM_PIXEL_NOISE_VAR = 1.0
SIM_PIXEL_MISSING_FRAC = 0.20
SIM_BLOCK_SIDE = 4
SIM_BLOCK_TAU2 = 0.25
SIM_BLOCK_NOISE_VAR = 0.25
SIM_MAX_REGENERATIONS = 100

# Monte Carlo harness
MAX_METHOD_FAILURE_FRAC = 0.10
TABLE_COLUMNS = ["Bias", "MSE", "CI length", "Coverage"]
ESTIMATE_COLUMNS = ["Estimate", "Standard Error", "CI Lower", "CI Upper"]

# Grid file format
GRID_FILE_REQUIRED_COLUMNS = ["row", "col", "Y0", "Y1", "D"]
GRID_FILE_MISSING = "NA"

# Knot sweep default (L = 0 means no basis expansion)
DEFAULT_KNOT_VALUES = [0, 49, 100, 144, 196]
