"""CART trees stored as flat arrays.

Classification trees split on Gini impurity and record per-feature impurity
decrease. Regression trees split on squared error; their leaf values come
from a caller-supplied function so that gradient boosting can plug in its
Newton step.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

LEAF = -1


class Tree:
    """Binary tree. Samples with ``x[feature] <= threshold`` go left."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] != LEAF
        while active.any():
            idx = rows[active]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        return cls(doc["feature"], doc["threshold"], doc["left"], doc["right"], doc["value"])


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add(self, value) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        return len(self.feature) - 1

    def split(self, node, feature, threshold, left, right):
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right

    def build(self) -> Tree:
        return Tree(self.feature, self.threshold, self.left, self.right, self.value)


def _threshold(lo: float, hi: float) -> float:
    mid = 0.5 * (lo + hi)
    # midpoint can round up to hi for adjacent floats
    return mid if mid < hi else lo


def _sorted_columns(Xn: np.ndarray):
    order = np.argsort(Xn, axis=0, kind="stable")
    return order, np.take_along_axis(Xn, order, axis=0)


def best_gini_split(Xn: np.ndarray, Yn: np.ndarray, min_leaf: int, tie_key: np.ndarray | None = None):
    """Best Gini split of a node.

    Parameters
    ----------
    Xn : (n, k) candidate feature columns of the node's samples.
    Yn : (n, K) one-hot labels.
    tie_key : (k,) optional
        Columns with exactly equal impurity are resolved by the smallest key
        (default: column position).

    Returns
    -------
    None when no admissible split exists, else ``(column, position,
    weighted child impurity, sort order, sorted values)`` where ``position``
    is the index in sorted order of the last sample sent left.
    """
    n = len(Xn)
    if n < 2 * min_leaf:
        return None
    order, xs = _sorted_columns(Xn)
    counts = np.cumsum(Yn[order], axis=0)  # (n, k, K)
    left = counts[:-1]
    right = counts[-1] - left
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    # sum of n_child * gini_child
    impurity = (n_left - (left * left).sum(-1) / n_left) + (n_right - (right * right).sum(-1) / n_right)
    valid = xs[1:] > xs[:-1]
    valid &= (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    impurity = np.where(valid, impurity / n, np.inf)
    per_col = impurity.min(axis=0)
    tied = np.flatnonzero(per_col == per_col.min())
    col = int(tied[0] if tie_key is None else tied[np.argmin(tie_key[tied])])
    pos = int(np.argmin(impurity[:, col]))
    return col, pos, float(per_col[col]), order[:, col], xs[:, col]


def grow_classification_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    rng: np.random.Generator,
    max_features: int,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    importance: np.ndarray | None = None,
    column_order: np.ndarray | None = None,
) -> Tree:
    """Grow a Gini tree on (X, y); leaves hold class frequencies.

    Candidate features per node are ``column_order[rng.permutation(d)[:max_features]]``
    and impurity ties go to the earliest column in ``column_order``. Passing
    an order that depends on column content only makes the tree independent
    of how the columns happen to be arranged.

    ``importance`` (length d), if given, is incremented by
    ``n_node / n_root * (gini_node - weighted child gini)`` at each split.
    """
    n_root, d = X.shape
    if column_order is None:
        column_order = np.arange(d)
    onehot = np.eye(n_classes)[y]
    builder = _Builder()

    def dist(idx):
        c = onehot[idx].sum(axis=0)
        return c / c.sum()

    root = builder.add(dist(np.arange(n_root)))
    stack = [(root, np.arange(n_root), 0)]
    while stack:
        node, idx, depth = stack.pop()
        p = builder.value[node]
        gini = 1.0 - float(p @ p)
        if gini <= 1e-15 or (max_depth is not None and depth >= max_depth):
            continue
        ranks = rng.permutation(d)[:max_features]
        cand = column_order[ranks]
        found = best_gini_split(X[np.ix_(idx, cand)], onehot[idx], min_samples_leaf, ranks)
        if found is None:
            continue
        col, pos, child_gini, order, xs = found
        feat = int(cand[col])
        thr = _threshold(xs[pos], xs[pos + 1])
        left_idx = idx[order[:pos + 1]]
        right_idx = idx[order[pos + 1:]]
        if importance is not None:
            importance[feat] += len(idx) / n_root * (gini - child_gini)
        li = builder.add(dist(left_idx))
        ri = builder.add(dist(right_idx))
        builder.split(node, feat, thr, li, ri)
        stack.append((ri, right_idx, depth + 1))
        stack.append((li, left_idx, depth + 1))
    return builder.build()


def best_sse_split(Xn: np.ndarray, r: np.ndarray, min_leaf: int):
    """Best squared-error split of residuals ``r`` over all columns of ``Xn``.

    Same return convention as :func:`best_gini_split`, with the split score
    ``S_l^2/n_l + S_r^2/n_r`` (higher is better) in third place.
    """
    n = len(Xn)
    if n < 2 * min_leaf:
        return None
    order, xs = _sorted_columns(Xn)
    cs = np.cumsum(r[order], axis=0)[:-1]  # (n-1, d)
    total = r.sum()
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    # maximise S_l^2/n_l + S_r^2/n_r  <=>  minimise SSE_l + SSE_r
    gain = cs * cs / n_left + (total - cs) ** 2 / n_right
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf)
    per_col = gain.max(axis=0)
    col = int(np.argmax(per_col))
    pos = int(np.argmax(gain[:, col]))
    return col, pos, float(per_col[col]), order[:, col], xs[:, col]


def grow_regression_tree(
    X: np.ndarray,
    r: np.ndarray,
    leaf_value: Callable[[np.ndarray], float],
    max_depth: int = 3,
    min_samples_leaf: int = 1,
) -> Tree:
    """Squared-error regression tree on residuals ``r``.

    Leaf values are ``leaf_value(sample_indices)``, not the residual mean.
    """
    n = len(X)
    builder = _Builder()
    root = builder.add(0.0)
    stack = [(root, np.arange(n), 0)]
    leaves = []
    while stack:
        node, idx, depth = stack.pop()
        found = None
        if depth < max_depth:
            found = best_sse_split(X[idx], r[idx], min_samples_leaf)
        if found is None:
            leaves.append((node, idx))
            continue
        col, pos, gain, order, xs = found
        base = r[idx].sum() ** 2 / len(idx)
        if gain - base <= 1e-12 * max(1.0, abs(base)):
            leaves.append((node, idx))
            continue
        li, ri = builder.add(0.0), builder.add(0.0)
        builder.split(node, col, _threshold(xs[pos], xs[pos + 1]), li, ri)
        stack.append((ri, idx[order[pos + 1:]], depth + 1))
        stack.append((li, idx[order[:pos + 1]], depth + 1))
    for node, idx in leaves:
        builder.value[node] = leaf_value(idx)
    return builder.build()
