"""Random forest for Gini-importance feature ranking."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from ..errors import ValidationError
from .tree import grow_classification_tree


@dataclass(frozen=True)
class RandomForestConfig:
    n_trees: int = 500
    max_depth: int | None = None
    features_per_split: int | str = "sqrt"
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if int(self.n_trees) != self.n_trees or self.n_trees < 1:
            raise ValidationError("forest.n_trees must be an integer >= 1")
        if self.max_depth is not None and (int(self.max_depth) != self.max_depth or self.max_depth < 1):
            raise ValidationError("forest.max_depth must be a positive integer or null")
        if int(self.min_samples_leaf) != self.min_samples_leaf or self.min_samples_leaf < 1:
            raise ValidationError("forest.min_samples_leaf must be an integer >= 1")
        if isinstance(self.features_per_split, str):
            if self.features_per_split not in ("sqrt", "all"):
                raise ValidationError("forest.features_per_split must be an integer, 'sqrt' or 'all'")
        elif int(self.features_per_split) != self.features_per_split or self.features_per_split < 1:
            raise ValidationError("forest.features_per_split must be >= 1")

    def resolve_mtry(self, d: int) -> int:
        if self.features_per_split == "sqrt":
            return max(1, int(round(np.sqrt(d))))
        if self.features_per_split == "all":
            return d
        if self.features_per_split > d:
            raise ValidationError(f"features_per_split={self.features_per_split} exceeds d={d}")
        return int(self.features_per_split)


@dataclass(eq=False)
class RandomForest:
    trees: list
    importance: np.ndarray
    classes: np.ndarray

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(self.predict_proba(X), axis=1)]


def content_order(X: np.ndarray) -> np.ndarray:
    """Column order that depends on column values only."""
    keys = [hashlib.blake2b(np.ascontiguousarray(X[:, j]).tobytes(), digest_size=16).digest()
            for j in range(X.shape[1])]
    return np.array(sorted(range(X.shape[1]), key=lambda j: (keys[j], j)), dtype=np.int64)


def _fit_tree(X, y, n_classes, cfg: RandomForestConfig, mtry, order, tree_index):
    rng = np.random.default_rng([cfg.seed, tree_index])
    boot = rng.integers(0, len(X), size=len(X))
    imp = np.zeros(X.shape[1])
    tree = grow_classification_tree(
        X[boot], y[boot], n_classes, rng, mtry,
        max_depth=cfg.max_depth, min_samples_leaf=cfg.min_samples_leaf,
        importance=imp, column_order=order,
    )
    return tree, imp


def fit_random_forest(X, y, cfg: RandomForestConfig = RandomForestConfig(), n_jobs: int = 1) -> RandomForest:
    """Bagged Gini trees and their total impurity-decrease importance.

    Each tree draws its bootstrap and feature candidates from a generator
    seeded by ``(cfg.seed, tree_index)``, so the result does not depend on
    ``n_jobs``. Importances are summed over trees and normalised to 1; if no
    tree could split at all they are all zero.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y) or len(X) == 0:
        raise ValidationError("random forest: X must be n x d with one label per row")
    if not np.isfinite(X).all():
        raise ValidationError("random forest: non-finite feature values")
    classes, y_idx = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise ValidationError("random forest: need at least 2 classes")
    mtry = cfg.resolve_mtry(X.shape[1])
    order = content_order(X)
    jobs = (delayed(_fit_tree)(X, y_idx, len(classes), cfg, mtry, order, t) for t in range(cfg.n_trees))
    if n_jobs == 1:
        results = [f(*a, **k) for f, a, k in jobs]
    else:
        results = Parallel(n_jobs=n_jobs)(jobs)
    trees = [t for t, _ in results]
    importance = np.sum([imp for _, imp in results], axis=0)
    total = math.fsum(importance)  # exact, so independent of column order
    if total > 0:
        importance = importance / total
    return RandomForest(trees, importance, classes)


def select_features(importance, k: int = 50) -> list[int]:
    """Indices of the ``k`` largest importances (ties to the lower index), ascending."""
    importance = np.asarray(importance, dtype=float)
    if k > len(importance):
        raise ValidationError(f"cannot select {k} features out of {len(importance)}")
    if k < 1:
        raise ValidationError("k must be >= 1")
    ranked = np.lexsort((np.arange(len(importance)), -importance))
    return sorted(int(i) for i in ranked[:k])
