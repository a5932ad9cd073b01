"""
Tree ensemble models - fitted sum-of-trees posterior draws

All nodes of all kept draws are stored in flat arrays. roots[d, j] is the node id
of tree j in kept draw d; node_var == -1 marks a leaf. Internal nodes send a row
left when x[node_var] <= node_cut.
"""
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict


class TreeEnsembleModel(BaseModel):
    """Posterior draws of a sum-of-trees regression for one target"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: str  # "continuous" or "binary"
    feature_names: List[str]
    node_var: np.ndarray
    node_cut: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_value: np.ndarray
    roots: np.ndarray  # (kept_draws, n_trees)
    split_counts: np.ndarray  # (kept_draws, n_features)

    # response transform: continuous prediction = shift + scale * sum of trees,
    # binary prediction = mean over draws of Phi(shift + sum of trees)
    shift: float = 0.0
    scale: float = 1.0

    sigma_draws: Optional[np.ndarray] = None  # original units, continuous only
    sigma_prior_df: Optional[float] = None
    sigma_prior_scale: Optional[float] = None  # lambda, original units
    constant: Optional[float] = None  # set when the training response was constant

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_draws(self) -> int:
        return int(self.roots.shape[0])

    @property
    def n_trees(self) -> int:
        return int(self.roots.shape[1]) if self.roots.ndim == 2 else 0

    @property
    def is_constant(self) -> bool:
        return self.constant is not None


class RandomEffectsFit(BaseModel):
    """Block intercept draws alpha_g and variance draws tau^2 (original units)"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    block_ids: np.ndarray  # training block labels, sorted
    intercept_draws: np.ndarray  # (kept_draws, n_blocks)
    variance_draws: np.ndarray  # (kept_draws,)

    @property
    def intercept_means(self) -> np.ndarray:
        return self.intercept_draws.mean(axis=0)

    def intercepts_for(self, labels: np.ndarray) -> np.ndarray:
        """Posterior-mean intercept per row; 0 for blocks unseen in training"""
        labels = np.asarray(labels)
        pos = np.searchsorted(self.block_ids, labels)
        pos = np.clip(pos, 0, len(self.block_ids) - 1)
        known = self.block_ids[pos] == labels
        return np.where(known, self.intercept_means[pos], 0.0)
