"""Axis-aligned binary regression trees with a fixed leaf budget.

Growth is best-first: starting from a single leaf, the split with the
largest squared-error reduction anywhere in the tree is applied until the
leaf budget is reached or no split helps. Candidate thresholds are the
midpoints between consecutive distinct sorted values of each feature.

All tie-breaks are deterministic: lower feature index, then lower
threshold, then earliest-created leaf. Leaves are numbered 1..num_leaves
in left-to-right order once growth finishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y


@dataclass
class Leaf:
    value: float
    training_count: int = 0
    leaf_index: int = 0


@dataclass
class SplitNode:
    feature_index: int
    threshold: float
    left: "SplitNode | Leaf"
    right: "SplitNode | Leaf"


@dataclass
class RegressionTree:
    """A fitted tree: routing sends ``x`` left iff ``x[f] <= threshold``."""

    root: SplitNode | Leaf
    num_leaves: int
    training_sse: float | None = None

    def predict_one(self, x) -> float:
        return self._route(x).value

    def assign_leaf(self, x) -> int:
        """Index (1-based, left-to-right) of the leaf ``x`` routes to."""
        return self._route(x).leaf_index

    def _route(self, x) -> Leaf:
        node = self.root
        while isinstance(node, SplitNode):
            node = node.left if x[node.feature_index] <= node.threshold else node.right
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.fromiter((self.predict_one(row) for row in X),
                           dtype=np.float64, count=len(X))

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.fromiter((self.assign_leaf(row) for row in X),
                           dtype=np.int64, count=len(X))

    def leaves(self) -> list[Leaf]:
        out: list[Leaf] = []

        def walk(node):
            if isinstance(node, Leaf):
                out.append(node)
            else:
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return out

    def leaf_value(self, leaf_index: int) -> float:
        for leaf in self.leaves():
            if leaf.leaf_index == leaf_index:
                return leaf.value
        raise KeyError(f"no leaf with index {leaf_index}")


class _GrowNode:
    """Mutable node used during growth; frozen into Leaf/SplitNode at the end."""

    __slots__ = ("indices", "value", "sse", "created", "split", "left", "right")

    def __init__(self, indices: np.ndarray, value: float, sse: float,
                 created: int):
        self.indices = indices
        self.value = value
        self.sse = sse
        self.created = created
        self.split = None  # (gain, feature, threshold, left_mask)
        self.left: "_GrowNode | None" = None
        self.right: "_GrowNode | None" = None


def _best_split(X: np.ndarray, r: np.ndarray, indices: np.ndarray,
                min_leaf: int):
    """Best (gain, feature, threshold) for one node, or None.

    A vectorized prefix-sum scan scores every candidate cheaply; the
    contenders near the maximum are then re-scored with plain per-side SSE
    arithmetic so that mathematically tied candidates compare exactly equal
    and the documented tie-breaks (lower feature index, lower threshold)
    apply regardless of floating-point noise in the fast formula.
    """
    n = indices.size
    if n < 2 * min_leaf:
        return None
    rs = r[indices]
    if np.all(rs == rs[0]):
        return None
    Xs = X[indices]
    order = np.argsort(Xs, axis=0, kind="stable")
    xsorted = np.take_along_axis(Xs, order, axis=0)
    rsorted = rs[order]
    csum = np.cumsum(rsorted, axis=0)
    ks = np.arange(1, n, dtype=np.float64)[:, None]  # left-group sizes
    left = csum[:-1]
    right = csum[-1][None, :] - left
    gain = (left * left / ks + right * right / (n - ks)
            - (csum[-1] * csum[-1] / n)[None, :])
    valid = xsorted[1:] != xsorted[:-1]  # cut only between distinct values
    valid &= (ks >= min_leaf) & ((n - ks) >= min_leaf)
    gain = np.where(valid, gain, -np.inf)
    approx_best = float(gain.max())
    if not np.isfinite(approx_best):
        return None

    node_sse = float(np.sum((rs - rs.mean()) ** 2))
    tol = 1e-6 * (node_sse + abs(approx_best) + 1.0)
    best = None
    for feature, k in zip(*np.nonzero(gain.T >= approx_best - tol)):
        k = int(k) + 1
        threshold = (xsorted[k - 1, feature] + xsorted[k, feature]) / 2.0
        mask = Xs[:, feature] <= threshold
        lvals, rvals = rs[mask], rs[~mask]
        exact = node_sse - float(np.sum((lvals - lvals.mean()) ** 2)) \
            - float(np.sum((rvals - rvals.mean()) ** 2))
        # scan order is (feature asc, threshold asc); strict > keeps it
        if exact > 0.0 and (best is None or exact > best[0]):
            best = (exact, int(feature), threshold)
    return best


def fit_tree(X: np.ndarray, r: np.ndarray, n_leaves: int,
             min_leaf: int = 2) -> RegressionTree:
    """Grow a regression tree on targets ``r`` with at most ``n_leaves`` leaves.

    Leaf values are target means; ``training_sse`` is the exact sum of
    squared residuals of the fitted tree on the training data.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    r = np.asarray(r, dtype=np.float64).ravel()
    n = r.size
    if n == 0:
        raise ValueError("cannot fit a tree on zero samples")
    if X.shape[0] != n:
        raise ValueError(f"X has {X.shape[0]} rows but r has {n} values")
    if n_leaves < 1:
        raise ValueError("n_leaves must be >= 1")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")

    all_idx = np.arange(n)
    mean = float(r.mean())
    root = _GrowNode(all_idx, mean, float(np.sum((r - mean) ** 2)), created=0)
    counter = 1
    frontier = [root]
    for node in frontier:
        node.split = _best_split(X, r, node.indices, min_leaf)
    num_leaves = 1
    while num_leaves < n_leaves:
        # strict > keeps the earliest-created leaf on equal gain
        chosen = None
        for node in frontier:
            if node.split is not None and (
                    chosen is None or node.split[0] > chosen.split[0]):
                chosen = node
        if chosen is None:
            break
        _, feature, threshold = chosen.split
        left_mask = X[chosen.indices, feature] <= threshold
        for part_idx in (chosen.indices[left_mask], chosen.indices[~left_mask]):
            part = r[part_idx]
            part_mean = float(part.mean())
            child = _GrowNode(part_idx, part_mean,
                              float(np.sum((part - part_mean) ** 2)), counter)
            counter += 1
            child.split = _best_split(X, r, part_idx, min_leaf)
            if chosen.left is None:
                chosen.left = child
            else:
                chosen.right = child
            frontier.append(child)
        frontier.remove(chosen)
        num_leaves += 1

    training_sse = 0.0
    next_index = 1

    def freeze(node: _GrowNode) -> SplitNode | Leaf:
        nonlocal training_sse, next_index
        if node.left is None:
            training_sse += node.sse
            leaf = Leaf(value=node.value, training_count=node.indices.size,
                        leaf_index=next_index)
            next_index += 1
            return leaf
        _, feature, threshold = node.split
        return SplitNode(feature_index=feature, threshold=threshold,
                         left=freeze(node.left), right=freeze(node.right))

    tree_root = freeze(root)
    return RegressionTree(root=tree_root, num_leaves=num_leaves,
                          training_sse=training_sse)


def tree_to_dict(tree: RegressionTree) -> dict:
    """Nested dict form used inside model files."""

    def walk(node):
        if isinstance(node, Leaf):
            return {"leaf": {"index": node.leaf_index, "value": node.value}}
        return {"split": {"feature": node.feature_index,
                          "threshold": node.threshold,
                          "left": walk(node.left),
                          "right": walk(node.right)}}

    return walk(tree.root)


def tree_from_dict(obj: dict) -> RegressionTree:
    num_leaves = 0

    def walk(o):
        nonlocal num_leaves
        if "leaf" in o:
            num_leaves += 1
            return Leaf(value=float(o["leaf"]["value"]),
                        leaf_index=int(o["leaf"]["index"]))
        if "split" in o:
            s = o["split"]
            return SplitNode(feature_index=int(s["feature"]),
                             threshold=float(s["threshold"]),
                             left=walk(s["left"]), right=walk(s["right"]))
        raise ValueError("tree node must have a 'leaf' or 'split' key")

    root = walk(obj)
    return RegressionTree(root=root, num_leaves=num_leaves, training_sse=None)


class CartRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_tree`.

    Parameters
    ----------
    n_leaves : leaf budget of the grown tree.
    min_leaf : minimum training samples on each side of every split.
    """

    def __init__(self, n_leaves: int = 5, min_leaf: int = 2):
        self.n_leaves = n_leaves
        self.min_leaf = min_leaf

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.tree_ = fit_tree(X, y, self.n_leaves, self.min_leaf)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "tree_")
        X = check_array(X)
        return self.tree_.predict(X)

    def apply(self, X):
        """1-based leaf index each sample routes to."""
        check_is_fitted(self, "tree_")
        X = check_array(X)
        return self.tree_.apply(X)
