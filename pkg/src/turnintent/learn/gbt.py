"""Multinomial-deviance gradient boosting with regression trees.

Each round fits, for every class k, a squared-error tree to the residual
``onehot_k - p_k`` and sets each leaf to the one-step Newton value

    (K - 1) / K * sum(r) / sum(|r| (1 - |r|))

before shrinking by the learning rate. Scores start at the log class priors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from ..errors import ValidationError
from .model import TrainedModel, prepare_training
from .tree import Tree, grow_regression_tree


@dataclass(frozen=True)
class GbtConfig:
    n_rounds: int = 200
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_leaf: int = 5
    subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n_rounds) != self.n_rounds or self.n_rounds < 1:
            raise ValidationError("gbt.n_rounds must be an integer >= 1")
        if not 0 <= self.learning_rate <= 1:
            raise ValidationError("gbt.learning_rate must lie in [0, 1]")
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise ValidationError("gbt.max_depth must be an integer >= 1")
        if int(self.min_samples_leaf) != self.min_samples_leaf or self.min_samples_leaf < 1:
            raise ValidationError("gbt.min_samples_leaf must be an integer >= 1")
        if not 0 < self.subsample <= 1:
            raise ValidationError("gbt.subsample must lie in (0, 1]")


def log_loss(raw: np.ndarray, y_idx: np.ndarray) -> float:
    """Mean multinomial negative log-likelihood of raw scores."""
    return float(np.mean(logsumexp(raw, axis=1) - raw[np.arange(len(y_idx)), y_idx]))


def newton_leaf(r: np.ndarray, n_classes: int):
    factor = (n_classes - 1) / n_classes

    def value(idx: np.ndarray) -> float:
        num = r[idx].sum()
        a = np.abs(r[idx])
        den = (a * (1.0 - a)).sum()
        return 0.0 if abs(den) < 1e-150 else float(factor * num / den)

    return value


class GbtLearner:
    def __init__(self, init: np.ndarray, learning_rate: float, trees: list, train_loss: list | None = None):
        self.init = np.asarray(init, dtype=float)
        self.learning_rate = learning_rate
        self.trees = trees  # one list of K trees per round
        self.train_loss = train_loss or []

    def raw_scores(self, Z: np.ndarray) -> np.ndarray:
        raw = np.tile(self.init, (len(Z), 1))
        for round_trees in self.trees:
            for k, tree in enumerate(round_trees):
                raw[:, k] += self.learning_rate * tree.predict(Z)
        return raw

    def predict(self, Z: np.ndarray):
        proba = softmax(self.raw_scores(Z), axis=1)
        return np.argmax(proba, axis=1), proba

    def to_dict(self) -> dict:
        return {"init": self.init.tolist(), "learning_rate": self.learning_rate,
                "trees": [[t.to_dict() for t in rt] for rt in self.trees], "train_loss": self.train_loss}

    @classmethod
    def from_dict(cls, doc: dict) -> "GbtLearner":
        trees = [[Tree.from_dict(t) for t in rt] for rt in doc["trees"]]
        return cls(doc["init"], doc["learning_rate"], trees, doc.get("train_loss"))


def fit_gbt(X, y, cfg: GbtConfig = GbtConfig(), selected=None) -> TrainedModel:
    """Boosted trees on the ``selected`` columns of ``X`` (z-scored on training rows).

    The learner keeps the training log-loss after every round in
    ``learner.train_loss``.
    """
    Z, y_idx, classes, selected, std = prepare_training(X, y, selected)
    n, n_classes = len(Z), len(classes)
    onehot = np.eye(n_classes)[y_idx]
    prior = onehot.mean(axis=0)
    init = np.log(prior)
    raw = np.tile(init, (n, 1))
    rng = np.random.default_rng(cfg.seed)
    trees, losses = [], []
    for _ in range(cfg.n_rounds):
        proba = softmax(raw, axis=1)
        if cfg.subsample < 1:
            rows = np.sort(rng.choice(n, size=max(1, int(round(cfg.subsample * n))), replace=False))
        else:
            rows = np.arange(n)
        round_trees = []
        for k in range(n_classes):
            r = onehot[rows, k] - proba[rows, k]
            tree = grow_regression_tree(Z[rows], r, newton_leaf(r, n_classes), cfg.max_depth, cfg.min_samples_leaf)
            round_trees.append(tree)
        for k, tree in enumerate(round_trees):
            raw[:, k] += cfg.learning_rate * tree.predict(Z)
        trees.append(round_trees)
        losses.append(log_loss(raw, y_idx))
    learner = GbtLearner(init, cfg.learning_rate, trees, losses)
    return TrainedModel("gbt", classes, np.asarray(X).shape[1], selected, std, learner)
