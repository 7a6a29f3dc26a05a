"""Tree-based classifiers: CART, extremely randomized trees, and
logistic-loss gradient-boosted regression trees.

All trees share one node shape and the routing rule "go left iff
value < threshold" (ties route right). Classification leaves hold the
positive-class probability; boosting leaves hold additive raw scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput, SingleClassInput
from .preprocess import DesignMatrix

_MASK64 = (1 << 64) - 1

# Boosting leaf values are capped for numeric stability; sigma(15) is
# already within 4e-7 of saturation so predictions are unaffected.
_MAX_LEAF_SCORE = 15.0


@dataclass
class Leaf:
    value: float


@dataclass
class Split:
    feature_index: int
    threshold: float
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None


TreeNode = Leaf | Split


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None      # None = unbounded
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


@dataclass
class ForestModel:
    """Ensemble of trees aggregated by mean leaf probability."""

    trees: list[TreeNode]
    n_features_considered: int

    def __post_init__(self):
        if not self.trees:
            raise ValueError("forest needs at least one tree")


@dataclass
class GbdtModel:
    """Additive model: sigmoid(base_score + shrinkage * sum of trees)."""

    base_score: float
    trees: list[TreeNode]
    shrinkage: float


def _as_matrix(m) -> np.ndarray:
    if isinstance(m, DesignMatrix):
        return m.values
    return np.asarray(m, dtype=np.float64)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _best_gini_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Lowest weighted-Gini split over all features.

    Thresholds are midpoints between adjacent distinct sorted values.
    Ties break toward the lowest feature index, then lowest threshold.
    Returns (feature, threshold) or None when no valid split exists.
    """
    n, d = X.shape
    pos_total = int(y.sum())
    best_score = np.inf
    best = None
    for f in range(d):
        col = X[:, f]
        order = np.argsort(col)
        xs = col[order]
        bounds = np.nonzero(xs[1:] > xs[:-1])[0]
        if len(bounds) == 0:
            continue
        n_left = bounds + 1
        pos_left = np.cumsum(y[order])[bounds]
        n_right = n - n_left
        pos_right = pos_total - pos_left
        valid = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        weighted = (pos_left * (n_left - pos_left) / n_left
                    + pos_right * (n_right - pos_right) / n_right) * (2.0 / n)
        weighted[~valid] = np.inf
        j = int(np.argmin(weighted))
        if weighted[j] < best_score:
            best_score = weighted[j]
            best = (f, (xs[bounds[j]] + xs[bounds[j] + 1]) / 2.0)
    return best


def _best_sse_split(X: np.ndarray, r: np.ndarray, min_leaf: int):
    """Least-squares split on residuals, same tie rules as the Gini one."""
    n, d = X.shape
    r_total = r.sum()
    best_score = -np.inf
    best = None
    for f in range(d):
        col = X[:, f]
        order = np.argsort(col)
        xs = col[order]
        bounds = np.nonzero(xs[1:] > xs[:-1])[0]
        if len(bounds) == 0:
            continue
        n_left = bounds + 1
        sum_left = np.cumsum(r[order])[bounds]
        n_right = n - n_left
        sum_right = r_total - sum_left
        valid = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        # Maximizing this is minimizing total within-child squared error.
        score = sum_left ** 2 / n_left + sum_right ** 2 / n_right
        score[~valid] = -np.inf
        j = int(np.argmax(score))
        if score[j] > best_score:
            best_score = score[j]
            best = (f, (xs[bounds[j]] + xs[bounds[j] + 1]) / 2.0)
    return best


def _grow_tree(X, idx, params, find_split, leaf_value, is_pure) -> TreeNode:
    """Shared depth-first growth loop with an explicit stack."""
    holder = Split(-1, 0.0)  # sentinel parent for the root
    stack = [(idx, 0, holder, "left")]
    while stack:
        node_idx, depth, parent, side = stack.pop()
        n_node = len(node_idx)
        stop = (
            is_pure(node_idx)
            or n_node < params.min_samples_split
            or (params.max_depth is not None and depth >= params.max_depth)
        )
        split = None if stop else find_split(node_idx)
        if split is None:
            setattr(parent, side, Leaf(leaf_value(node_idx)))
            continue
        f, t = split
        go_left = X[node_idx, f] < t
        node = Split(f, t)
        setattr(parent, side, node)
        stack.append((node_idx[go_left], depth + 1, node, "left"))
        stack.append((node_idx[~go_left], depth + 1, node, "right"))
    return holder.left


def fit_decision_tree(m: DesignMatrix, params: TreeParams) -> TreeNode:
    """Greedy CART: exact best Gini split over all features at each node."""
    X, y = m.values, m.labels
    if X.shape[0] == 0:
        raise EmptyInput("cannot fit a tree on zero records")

    def find_split(idx):
        return _best_gini_split(X[idx], y[idx], params.min_samples_leaf)

    def leaf_value(idx):
        return float(y[idx].mean())

    def is_pure(idx):
        sub = y[idx]
        return sub[0] == sub[-1] and (sub == sub[0]).all()

    return _grow_tree(X, np.arange(X.shape[0]), params,
                      find_split, leaf_value, is_pure)


def _weighted_gini(y_node: np.ndarray, go_left: np.ndarray) -> float:
    n = len(y_node)
    n_left = int(go_left.sum())
    n_right = n - n_left
    pos_left = int(y_node[go_left].sum())
    pos_right = int(y_node.sum()) - pos_left
    g = 0.0
    if n_left:
        g += 2.0 * pos_left * (n_left - pos_left) / n_left
    if n_right:
        g += 2.0 * pos_right * (n_right - pos_right) / n_right
    return g / n


def _fit_extra_tree_seeded(X, y, params: TreeParams,
                           rng: np.random.Generator) -> TreeNode:
    n, d = X.shape
    k = math.ceil(math.sqrt(d))

    def find_split(idx):
        y_sub = y[idx]
        candidates = rng.choice(d, size=min(k, d), replace=False)
        best_score = np.inf
        best = None
        for f in candidates:
            col = X[idx, f]
            lo = col.min()
            hi = col.max()
            if lo == hi:
                continue
            t = rng.uniform(lo, hi)
            go_left = col < t
            n_left = int(go_left.sum())
            n_right = len(col) - n_left
            if (n_left < params.min_samples_leaf
                    or n_right < params.min_samples_leaf
                    or n_left == 0 or n_right == 0):
                continue
            score = _weighted_gini(y_sub, go_left)
            if score < best_score:
                best_score = score
                best = (int(f), float(t))
        return best

    def leaf_value(idx):
        return float(y[idx].mean())

    def is_pure(idx):
        sub = y[idx]
        return sub[0] == sub[-1] and (sub == sub[0]).all()

    return _grow_tree(X, np.arange(n), params, find_split, leaf_value, is_pure)


def fit_extra_tree(m: DesignMatrix, params: TreeParams) -> TreeNode:
    """One extremely randomized tree: sqrt(d) candidate features per node,
    one uniform-random threshold each, best Gini gain wins."""
    X, y = m.values, m.labels
    if X.shape[0] == 0:
        raise EmptyInput("cannot fit a tree on zero records")
    rng = np.random.default_rng((params.seed & _MASK64, 2, 0))
    return _fit_extra_tree_seeded(X, y, params, rng)


def fit_extra_trees_ensemble(
    m: DesignMatrix, params: TreeParams, n_trees: int
) -> ForestModel:
    """n_trees extremely randomized trees on the full sample (no
    bootstrap), each with its own derived seed; prediction averages
    leaf probabilities. Member 0 matches fit_extra_tree exactly."""
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X, y = m.values, m.labels
    if X.shape[0] == 0:
        raise EmptyInput("cannot fit a forest on zero records")
    trees = []
    for i in range(n_trees):
        rng = np.random.default_rng((params.seed & _MASK64, 2, i))
        trees.append(_fit_extra_tree_seeded(X, y, params, rng))
    k = math.ceil(math.sqrt(X.shape[1]))
    return ForestModel(trees, n_features_considered=min(k, X.shape[1]))


def fit_gbdt(
    m: DesignMatrix,
    rounds: int,
    shrinkage: float,
    tree_params: TreeParams | None = None,
) -> GbdtModel:
    """Logistic-loss gradient boosting with one-step Newton leaf values.

    Each round fits a least-squares regression tree to the residuals
    e - p, then sets every leaf to sum(residual) / sum(p*(1-p)) over its
    samples (capped at +-15 for stability).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if not 0.0 < shrinkage <= 1.0:
        raise ValueError("shrinkage must be in (0, 1]")
    if tree_params is None:
        tree_params = TreeParams(max_depth=6)
    X, y = m.values, m.labels
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("boosting needs both classes in the labels")
    yf = y.astype(np.float64)
    base = float(np.log(n_pos / n_neg))
    raw = np.full(len(y), base)
    trees: list[TreeNode] = []
    for _ in range(rounds):
        p = np.clip(_sigmoid(raw), 1e-7, 1.0 - 1e-7)
        residual = yf - p
        hessian = p * (1.0 - p)
        tree = _fit_residual_tree(X, residual, hessian, tree_params)
        trees.append(tree)
        raw = raw + shrinkage * _apply_tree(tree, X)
    return GbdtModel(base, trees, shrinkage)


def _fit_residual_tree(X, residual, hessian, params: TreeParams) -> TreeNode:
    def find_split(idx):
        return _best_sse_split(X[idx], residual[idx], params.min_samples_leaf)

    def leaf_value(idx):
        newton = residual[idx].sum() / max(hessian[idx].sum(), 1e-12)
        return float(np.clip(newton, -_MAX_LEAF_SCORE, _MAX_LEAF_SCORE))

    def is_pure(idx):
        sub = residual[idx]
        return sub.max() - sub.min() < 1e-15

    return _grow_tree(X, np.arange(X.shape[0]), params,
                      find_split, leaf_value, is_pure)


def _apply_tree(root: TreeNode, X: np.ndarray) -> np.ndarray:
    """Leaf value per row, vectorized by routing index blocks."""
    out = np.empty(X.shape[0])
    stack = [(root, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if isinstance(node, Leaf):
            out[idx] = node.value
            continue
        go_left = X[idx, node.feature_index] < node.threshold
        stack.append((node.left, idx[go_left]))
        stack.append((node.right, idx[~go_left]))
    return out


def _max_feature_index(root: TreeNode) -> int:
    top = -1
    stack = [root]
    while stack:
        node = stack.pop()
        if isinstance(node, Split):
            top = max(top, node.feature_index)
            stack.extend((node.left, node.right))
    return top


def _check_width(roots, X) -> None:
    needed = max((_max_feature_index(r) for r in roots), default=-1)
    if X.ndim != 2 or X.shape[1] <= needed:
        raise DimensionMismatch(
            f"matrix width {X.shape[-1] if X.ndim == 2 else '?'} too small "
            f"for tree using feature index {needed}")


def tree_predict_proba(root: TreeNode, m) -> np.ndarray:
    X = _as_matrix(m)
    _check_width([root], X)
    return _apply_tree(root, X)


def forest_predict_proba(f: ForestModel, m) -> np.ndarray:
    X = _as_matrix(m)
    _check_width(f.trees, X)
    stacked = np.stack([_apply_tree(t, X) for t in f.trees])
    return stacked.mean(axis=0)


def gbdt_raw_score(g: GbdtModel, m) -> np.ndarray:
    X = _as_matrix(m)
    _check_width(g.trees, X)
    raw = np.full(X.shape[0], g.base_score)
    for tree in g.trees:
        raw += g.shrinkage * _apply_tree(tree, X)
    return raw


def gbdt_predict_proba(g: GbdtModel, m) -> np.ndarray:
    return _sigmoid(gbdt_raw_score(g, m))


def predict_tree(root: TreeNode, m) -> np.ndarray:
    """Binary labels from leaf probabilities, threshold 0.5 (>= is 1)."""
    return (tree_predict_proba(root, m) >= 0.5).astype(np.int64)


def predict_forest(f: ForestModel, m) -> np.ndarray:
    """Mean leaf probability across trees, then threshold 0.5."""
    return (forest_predict_proba(f, m) >= 0.5).astype(np.int64)


def predict_gbdt(g: GbdtModel, m) -> np.ndarray:
    """Sigmoid of the additive raw score, then threshold 0.5."""
    return (gbdt_predict_proba(g, m) >= 0.5).astype(np.int64)
