"""
Bayesian backfitting MCMC for sums of regression trees

The sampler works on a transformed response (scaled continuous response, or
probit latents for a binary response). Each sweep updates every tree with one
GROW / PRUNE / CHANGE Metropolis-Hastings proposal followed by a conjugate draw
of its leaf means, then updates the noise variance (continuous) or the latents
(binary), and optionally block random intercepts.
"""
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from stdml.core.constants import MOVE_PROBABILITIES
from stdml.schemas.learner import LearnerConfig

logger = logging.getLogger(__name__)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def cutpoint_grid(column: np.ndarray, size: int) -> np.ndarray:
    """Up to `size` quantile cutpoints strictly below the column maximum"""
    probs = np.arange(1, size + 1) / (size + 1)
    cuts = np.unique(np.quantile(column, probs))
    return cuts[cuts < column.max()]


class _Tree:
    """Mutable tree used while sampling; nodes keyed by integer id, root = 0"""

    __slots__ = ("var", "cut", "left", "right", "parent", "depth", "value",
                 "leaves", "nogs", "row_node", "_next")

    def __init__(self, n_rows: int):
        self.var: Dict[int, int] = {0: -1}
        self.cut: Dict[int, int] = {0: -1}
        self.left: Dict[int, int] = {}
        self.right: Dict[int, int] = {}
        self.parent: Dict[int, int] = {0: -1}
        self.depth: Dict[int, int] = {0: 0}
        self.value: Dict[int, float] = {0: 0.0}
        self.leaves = {0}
        self.nogs = set()  # internal nodes whose children are both leaves
        self.row_node = np.zeros(n_rows, dtype=np.int64)
        self._next = 1

    def rows_of(self, node: int) -> np.ndarray:
        if self.var[node] < 0:
            return np.flatnonzero(self.row_node == node)
        l, r = self.left[node], self.right[node]
        return np.flatnonzero((self.row_node == l) | (self.row_node == r))

    def split(self, node: int, var: int, cut: int, rows: np.ndarray, go_left: np.ndarray) -> None:
        l, r = self._next, self._next + 1
        self._next += 2
        self.var[node], self.cut[node] = var, cut
        self.left[node], self.right[node] = l, r
        for child in (l, r):
            self.var[child], self.cut[child] = -1, -1
            self.parent[child] = node
            self.depth[child] = self.depth[node] + 1
            self.value[child] = 0.0
        self.leaves.discard(node)
        self.leaves.update((l, r))
        self.nogs.discard(self.parent[node])
        self.nogs.add(node)
        self.row_node[rows[go_left]] = l
        self.row_node[rows[~go_left]] = r

    def prune(self, node: int, rows: np.ndarray) -> None:
        l, r = self.left.pop(node), self.right.pop(node)
        for child in (l, r):
            for store in (self.var, self.cut, self.parent, self.depth, self.value):
                del store[child]
            self.leaves.discard(child)
        self.var[node], self.cut[node] = -1, -1
        self.leaves.add(node)
        self.nogs.discard(node)
        p = self.parent[node]
        if p >= 0 and self.var[self.left[p]] < 0 and self.var[self.right[p]] < 0:
            self.nogs.add(p)
        self.row_node[rows] = node

    def rewire(self, node: int, var: int, cut: int, rows: np.ndarray, go_left: np.ndarray) -> None:
        self.var[node], self.cut[node] = var, cut
        self.row_node[rows[go_left]] = self.left[node]
        self.row_node[rows[~go_left]] = self.right[node]

    def internal_vars(self) -> List[int]:
        return [v for v in self.var.values() if v >= 0]

    def flatten(self, cut_values: List[np.ndarray]) -> Tuple[list, list, list, list, list]:
        """Breadth-first node arrays with compact local ids"""
        order = [0]
        local = {0: 0}
        i = 0
        while i < len(order):
            node = order[i]
            if self.var[node] >= 0:
                for child in (self.left[node], self.right[node]):
                    local[child] = len(order)
                    order.append(child)
            i += 1
        var, cut, left, right, value = [], [], [], [], []
        for node in order:
            v = self.var[node]
            var.append(v)
            if v >= 0:
                cut.append(float(cut_values[v][self.cut[node]]))
                left.append(local[self.left[node]])
                right.append(local[self.right[node]])
                value.append(0.0)
            else:
                cut.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(self.value[node])
        return var, cut, left, right, value


class BartSampler:
    """
    Backfitting sampler on a working response.

    binary=True treats `response` as 0/1 labels with probit latents and unit noise.
    blocks (labels per row) switches on block random intercepts with an
    inverse-gamma(re_shape, re_scale) prior on their variance.
    """

    def __init__(
        self,
        features: np.ndarray,
        response: np.ndarray,
        cfg: LearnerConfig,
        binary: bool = False,
        leaf_sd: float = 0.5,
        sigma2: float = 1.0,
        noise_df: Optional[float] = None,
        noise_scale: Optional[float] = None,
        offset: float = 0.0,
        blocks: Optional[np.ndarray] = None,
        re_shape: float = 1.0,
        re_scale: float = 1.0,
    ):
        self.X = np.asarray(features, dtype=float)
        self.n, self.q = self.X.shape
        self.cfg = cfg
        self.binary = binary
        self.rng = np.random.default_rng(cfg.seed)
        self.m = cfg.trees_for(binary)
        self.tau2 = leaf_sd ** 2
        self.sigma2 = 1.0 if binary else sigma2
        self.noise_df = noise_df
        self.noise_scale = noise_scale
        self.offset = offset

        self.cuts = [cutpoint_grid(self.X[:, j], cfg.cutpoint_grid) for j in range(self.q)]
        # xbin[i, j] <= k  <=>  X[i, j] <= cuts[j][k]
        self.xbin = np.column_stack(
            [np.searchsorted(self.cuts[j], self.X[:, j], side="left") for j in range(self.q)]
        ).astype(np.int64)

        if binary:
            self.labels = np.asarray(response, dtype=int)
            self.y = np.where(self.labels == 1, 1.0, -1.0)
        else:
            self.y = np.asarray(response, dtype=float)

        self.blocks = None
        if blocks is not None:
            self.block_ids, self.block_index = np.unique(blocks, return_inverse=True)
            self.blocks = self.block_index
            self.block_sizes = np.bincount(self.block_index).astype(float)
            self.alpha = np.zeros(len(self.block_ids))
            self.re_var = re_scale / max(re_shape, 1.0)
            self.re_shape = re_shape
            self.re_scale = re_scale

        self.trees = [_Tree(self.n) for _ in range(self.m)]
        self.tree_fit = np.zeros((self.m, self.n))
        self.fit = np.zeros(self.n)

    # -- priors and marginal likelihoods -----------------------------------

    def _p_split(self, depth: int) -> float:
        return self.cfg.split_prob_base * (1.0 + depth) ** (-self.cfg.split_prob_power)

    def _leaf_loglik(self, count: float, total: float) -> float:
        s2, t2 = self.sigma2, self.tau2
        return -0.5 * math.log(1.0 + count * t2 / s2) + 0.5 * t2 * total * total / (s2 * (s2 + count * t2))

    @staticmethod
    def _move_probs(tree: _Tree) -> Dict[str, float]:
        if not tree.nogs:
            return {"grow": 1.0, "prune": 0.0, "change": 0.0}
        return MOVE_PROBABILITIES

    def _rule_options(self, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Variables with at least one cut that leaves both children nonempty"""
        sub = self.xbin[rows]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        return np.flatnonzero(hi > lo), lo, hi

    def _draw_rule(self, rows: np.ndarray) -> Optional[Tuple[int, int]]:
        usable, lo, hi = self._rule_options(rows)
        if usable.size == 0:
            return None
        var = int(self.rng.choice(usable))
        cut = int(self.rng.integers(lo[var], hi[var]))
        return var, cut

    # -- tree moves ----------------------------------------------------------

    def _propose(self, tree: _Tree, target: np.ndarray) -> None:
        probs = self._move_probs(tree)
        u = self.rng.random()
        if u < probs["grow"]:
            self._grow(tree, target, probs)
        elif u < probs["grow"] + probs["prune"]:
            self._prune(tree, target, probs)
        else:
            self._change(tree, target)

    def _grow(self, tree: _Tree, target: np.ndarray, probs: Dict[str, float]) -> None:
        leaves = sorted(tree.leaves)
        node = leaves[int(self.rng.integers(len(leaves)))]
        rows = tree.rows_of(node)
        if rows.size < 2:
            return
        rule = self._draw_rule(rows)
        if rule is None:
            return
        var, cut = rule
        go_left = self.xbin[rows, var] <= cut

        d = tree.depth[node]
        p_node, p_child = self._p_split(d), self._p_split(d + 1)
        r = target[rows]
        n_l, s_l = float(go_left.sum()), float(r[go_left].sum())
        n_p, s_p = float(rows.size), float(r.sum())
        log_lik = (
            self._leaf_loglik(n_l, s_l)
            + self._leaf_loglik(n_p - n_l, s_p - s_l)
            - self._leaf_loglik(n_p, s_p)
        )
        log_prior = _log(p_node) + 2.0 * _log(1.0 - p_child) - _log(1.0 - p_node)

        parent = tree.parent[node]
        nogs_after = len(tree.nogs) + 1 - (1 if parent in tree.nogs else 0)
        log_proposal = (
            _log(MOVE_PROBABILITIES["prune"]) - _log(nogs_after)
            - _log(probs["grow"]) + _log(len(leaves))
        )
        if _log(self.rng.random()) < log_lik + log_prior + log_proposal:
            tree.split(node, var, cut, rows, go_left)

    def _prune(self, tree: _Tree, target: np.ndarray, probs: Dict[str, float]) -> None:
        nogs = sorted(tree.nogs)
        node = nogs[int(self.rng.integers(len(nogs)))]
        rows = tree.rows_of(node)
        go_left = tree.row_node[rows] == tree.left[node]

        d = tree.depth[node]
        p_node, p_child = self._p_split(d), self._p_split(d + 1)
        r = target[rows]
        n_l, s_l = float(go_left.sum()), float(r[go_left].sum())
        n_p, s_p = float(rows.size), float(r.sum())
        log_lik = (
            self._leaf_loglik(n_p, s_p)
            - self._leaf_loglik(n_l, s_l)
            - self._leaf_loglik(n_p - n_l, s_p - s_l)
        )
        log_prior = _log(1.0 - p_node) - _log(p_node) - 2.0 * _log(1.0 - p_child)

        leaves_after = len(tree.leaves) - 1
        grow_after = 1.0 if leaves_after == 1 else MOVE_PROBABILITIES["grow"]
        log_proposal = (
            _log(grow_after) - _log(leaves_after)
            - _log(probs["prune"]) + _log(len(nogs))
        )
        if _log(self.rng.random()) < log_lik + log_prior + log_proposal:
            tree.prune(node, rows)

    def _change(self, tree: _Tree, target: np.ndarray) -> None:
        nogs = sorted(tree.nogs)
        node = nogs[int(self.rng.integers(len(nogs)))]
        rows = tree.rows_of(node)
        rule = self._draw_rule(rows)
        if rule is None:
            return
        var, cut = rule
        new_left = self.xbin[rows, var] <= cut
        old_left = tree.row_node[rows] == tree.left[node]

        r = target[rows]
        n_p, s_p = float(rows.size), float(r.sum())

        def split_loglik(mask: np.ndarray) -> float:
            n_l, s_l = float(mask.sum()), float(r[mask].sum())
            return self._leaf_loglik(n_l, s_l) + self._leaf_loglik(n_p - n_l, s_p - s_l)

        if _log(self.rng.random()) < split_loglik(new_left) - split_loglik(old_left):
            tree.rewire(node, var, cut, rows, new_left)

    def _draw_leaves(self, tree: _Tree, target: np.ndarray) -> np.ndarray:
        leaf_ids, inverse = np.unique(tree.row_node, return_inverse=True)
        counts = np.bincount(inverse, minlength=len(leaf_ids)).astype(float)
        totals = np.bincount(inverse, weights=target, minlength=len(leaf_ids))
        denom = self.sigma2 + counts * self.tau2
        mean = self.tau2 * totals / denom
        sd = np.sqrt(self.sigma2 * self.tau2 / denom)
        values = mean + sd * self.rng.standard_normal(len(leaf_ids))
        for node, value in zip(leaf_ids, values):
            tree.value[int(node)] = float(value)
        return values[inverse]

    # -- other Gibbs blocks ---------------------------------------------------

    def _row_offsets(self) -> np.ndarray:
        if self.blocks is None:
            return 0.0
        return self.alpha[self.blocks]

    def _draw_latents(self) -> None:
        mean = self.offset + self.fit
        lower = np.where(self.labels == 1, -mean, -np.inf)
        upper = np.where(self.labels == 1, np.inf, -mean)
        z = stats.truncnorm.rvs(lower, upper, loc=mean, scale=1.0, random_state=self.rng)
        self.y = z - self.offset

    def _draw_sigma2(self) -> None:
        resid = self.y - self._row_offsets() - self.fit
        sse = float(resid @ resid)
        shape_df = self.noise_df + self.n
        self.sigma2 = (self.noise_df * self.noise_scale + sse) / self.rng.chisquare(shape_df)

    def _draw_random_effects(self) -> None:
        resid = self.y - self.fit
        totals = np.bincount(self.blocks, weights=resid, minlength=len(self.block_ids))
        precision = self.block_sizes / self.sigma2 + 1.0 / self.re_var
        mean = (totals / self.sigma2) / precision
        self.alpha = mean + self.rng.standard_normal(len(mean)) / np.sqrt(precision)
        shape = self.re_shape + 0.5 * len(self.alpha)
        rate = self.re_scale + 0.5 * float(self.alpha @ self.alpha)
        self.re_var = rate / self.rng.gamma(shape)

    # -- driver ---------------------------------------------------------------

    def run(self) -> Dict[str, np.ndarray]:
        cfg = self.cfg
        total = cfg.burn_in + cfg.kept_draws * cfg.keep_every
        node_var, node_cut, node_left, node_right, node_value = [], [], [], [], []
        roots = np.zeros((cfg.kept_draws, self.m), dtype=np.int64)
        split_counts = np.zeros((cfg.kept_draws, self.q))
        sigma_draws = np.zeros(cfg.kept_draws)
        alpha_draws = [] if self.blocks is not None else None
        re_var_draws = [] if self.blocks is not None else None

        kept = 0
        for it in range(total):
            if self.binary:
                self._draw_latents()
            offsets = self._row_offsets()
            for j, tree in enumerate(self.trees):
                target = self.y - offsets - (self.fit - self.tree_fit[j])
                self._propose(tree, target)
                new_fit = self._draw_leaves(tree, target)
                self.fit += new_fit - self.tree_fit[j]
                self.tree_fit[j] = new_fit
            if self.blocks is not None:
                self._draw_random_effects()
            if not self.binary:
                self._draw_sigma2()

            if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.keep_every == 0:
                for j, tree in enumerate(self.trees):
                    roots[kept, j] = len(node_var)
                    var, cut, left, right, value = tree.flatten(self.cuts)
                    base = len(node_var)
                    node_var.extend(var)
                    node_cut.extend(cut)
                    node_left.extend(l + base if l >= 0 else -1 for l in left)
                    node_right.extend(r + base if r >= 0 else -1 for r in right)
                    node_value.extend(value)
                    for v in tree.internal_vars():
                        split_counts[kept, v] += 1
                sigma_draws[kept] = self.sigma2
                if self.blocks is not None:
                    alpha_draws.append(self.alpha.copy())
                    re_var_draws.append(self.re_var)
                kept += 1

        logger.debug(
            "Sampler finished",
            extra={
                "iterations": total,
                "n_trees": self.m,
                "mean_internal_nodes": float(split_counts.sum(axis=1).mean()),
            },
        )
        out = {
            "node_var": np.asarray(node_var, dtype=np.int64),
            "node_cut": np.asarray(node_cut, dtype=float),
            "node_left": np.asarray(node_left, dtype=np.int64),
            "node_right": np.asarray(node_right, dtype=np.int64),
            "node_value": np.asarray(node_value, dtype=float),
            "roots": roots,
            "split_counts": split_counts,
            "sigma2": sigma_draws,
        }
        if self.blocks is not None:
            out["block_ids"] = self.block_ids
            out["alpha"] = np.asarray(alpha_draws)
            out["re_var"] = np.asarray(re_var_draws)
        return out


def route(model_arrays: Tuple[np.ndarray, ...], roots: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Sum of leaf values over the trees rooted at `roots` for every row of X"""
    node_var, node_cut, node_left, node_right, node_value = model_arrays
    n = X.shape[0]
    rows = np.arange(n)[:, None]
    nodes = np.broadcast_to(roots[None, :], (n, roots.size)).copy()
    while True:
        var = node_var[nodes]
        internal = var >= 0
        if not internal.any():
            break
        x = X[rows, np.where(internal, var, 0)]
        nxt = np.where(x <= node_cut[nodes], node_left[nodes], node_right[nodes])
        nodes = np.where(internal, nxt, nodes)
    return node_value[nodes].sum(axis=1)
