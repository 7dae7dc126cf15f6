"""RBF-kernel SVM trained by SMO, one-vs-one for more than two classes.

The binary solver works on the dual

    min  1/2 a^T Q a - e^T a    s.t.  0 <= a_i <= C,  y^T a = 0,
    Q_ij = y_i y_j K(x_i, x_j)

and at each step updates the maximal-violating pair (i from I_up maximising
-y_t grad_t, j from I_low minimising it). It stops once that gap is at most
``tol``; the gap is the KKT violation bound for every training point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..errors import ValidationError
from .model import TrainedModel, prepare_training


TAU = 1e-12


@dataclass(frozen=True)
class SvmConfig:
    c: float = 1.0
    gamma: float | str = "scale"
    tol: float = 1e-3
    max_passes: int = 100_000

    def __post_init__(self):
        if not self.c > 0:
            raise ValidationError("svm.c must be > 0")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise ValidationError("svm.gamma must be a positive number or 'scale'")
        elif not self.gamma > 0:
            raise ValidationError("svm.gamma must be > 0")
        if not self.tol > 0:
            raise ValidationError("svm.tol must be > 0")
        if int(self.max_passes) != self.max_passes or self.max_passes < 1:
            raise ValidationError("svm.max_passes must be a positive integer")

    def resolve_gamma(self, Z: np.ndarray) -> float:
        if self.gamma != "scale":
            return float(self.gamma)
        var = Z.var()
        return 1.0 / (Z.shape[1] * var) if var > 0 else 1.0


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


class BinarySvm:
    """Two-class machine; ``y`` in {+1, -1}.

    Attributes after :meth:`fit`: ``alpha`` (all training duals), ``b``,
    ``n_iter``, ``kkt_gap``, ``converged`` and the support set.
    """

    def __init__(self, c: float = 1.0, gamma: float = 1.0, tol: float = 1e-3, max_iter: int = 100_000):
        self.c, self.gamma, self.tol, self.max_iter = c, gamma, tol, max_iter

    def fit(self, X: np.ndarray, y: np.ndarray) -> "BinarySvm":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if set(np.unique(y)) != {-1.0, 1.0}:
            raise ValidationError("binary SVM labels must contain both +1 and -1")
        K = rbf_kernel(X, X, self.gamma)
        alpha, grad, n_iter, gap = _smo(K, y, self.c, self.tol, self.max_iter)
        self.alpha, self.n_iter, self.kkt_gap = alpha, n_iter, gap
        self.converged = gap <= self.tol
        if not self.converged:
            warnings.warn(f"SMO hit the iteration cap ({self.max_iter}) with KKT gap {gap:.3g}", RuntimeWarning)
        self.b = _bias(alpha, y, grad, self.c)
        sv = alpha > 0
        self.support_vectors = X[sv]
        self.dual_coef = alpha[sv] * y[sv]
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return rbf_kernel(np.asarray(X, dtype=float), self.support_vectors, self.gamma) @ self.dual_coef + self.b

    def to_dict(self) -> dict:
        return {
            "c": self.c, "gamma": self.gamma, "tol": self.tol, "max_iter": self.max_iter,
            "b": self.b, "n_iter": self.n_iter, "kkt_gap": self.kkt_gap,
            "n_features": self.support_vectors.shape[1],
            "support_vectors": self.support_vectors.tolist(), "dual_coef": self.dual_coef.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BinarySvm":
        m = cls(doc["c"], doc["gamma"], doc["tol"], doc["max_iter"])
        m.b, m.n_iter, m.kkt_gap = doc["b"], doc["n_iter"], doc["kkt_gap"]
        m.converged = m.kkt_gap <= m.tol
        m.support_vectors = np.asarray(doc["support_vectors"], dtype=float).reshape(-1, doc["n_features"])
        m.dual_coef = np.asarray(doc["dual_coef"], dtype=float)
        m.alpha = None
        return m


def _smo(K, y, c, tol, max_iter):
    n = len(y)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    Q = (y[:, None] * y[None, :]) * K
    pos, neg = y > 0, y < 0
    gap = np.inf
    n_iter = 0
    while n_iter < max_iter:
        yg = -y * grad
        up = (pos & (alpha < c)) | (neg & (alpha > 0))
        low = (neg & (alpha < c)) | (pos & (alpha > 0))
        i = int(np.argmax(np.where(up, yg, -np.inf)))
        j = int(np.argmin(np.where(low, yg, np.inf)))
        gap = yg[i] - yg[j]
        if gap <= tol:
            break
        curv = K[i, i] + K[j, j] - 2.0 * K[i, j]
        t = gap / (curv if curv > TAU else TAU)
        room_i = c - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else c - alpha[j]
        t = min(t, room_i, room_j)
        new_i = alpha[i] + y[i] * t
        new_j = alpha[j] - y[j] * t
        # land exactly on the box when clipped
        if t == room_i:
            new_i = c if y[i] > 0 else 0.0
        if t == room_j:
            new_j = 0.0 if y[j] > 0 else c
        di, dj = new_i - alpha[i], new_j - alpha[j]
        alpha[i], alpha[j] = new_i, new_j
        grad += Q[:, i] * di + Q[:, j] * dj
        n_iter += 1
    else:
        yg = -y * grad
        up = (pos & (alpha < c)) | (neg & (alpha > 0))
        low = (neg & (alpha < c)) | (pos & (alpha > 0))
        gap = float(np.max(yg[up]) - np.min(yg[low]))
    return alpha, grad, n_iter, float(gap)


def _bias(alpha, y, grad, c):
    yg = -y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        return float(yg[free].mean())
    up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
    low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
    return float((yg[up].max() + yg[low].min()) / 2)


class SvmLearner:
    """One-vs-one ensemble over class indices 0..K-1."""

    def __init__(self, n_classes: int, pairs, machines, gamma: float):
        self.n_classes, self.pairs, self.machines, self.gamma = n_classes, list(pairs), list(machines), gamma

    @property
    def converged(self) -> bool:
        return all(m.converged for m in self.machines)

    def predict(self, Z: np.ndarray):
        votes = np.zeros((len(Z), self.n_classes))
        scores = np.zeros((len(Z), self.n_classes))
        for (p, q), m in zip(self.pairs, self.machines):
            dec = m.decision_function(Z)
            win_p = dec > 0
            votes[:, p] += win_p
            votes[:, q] += ~win_p
            scores[:, p] += dec
            scores[:, q] -= dec
        # most votes; ties go to the larger summed decision value
        top = votes == votes.max(axis=1, keepdims=True)
        idx = np.argmax(np.where(top, scores, -np.inf), axis=1)
        return idx, scores

    def to_dict(self) -> dict:
        return {"n_classes": self.n_classes, "gamma": self.gamma,
                "pairs": [list(p) for p in self.pairs], "machines": [m.to_dict() for m in self.machines]}

    @classmethod
    def from_dict(cls, doc: dict) -> "SvmLearner":
        return cls(doc["n_classes"], [tuple(p) for p in doc["pairs"]],
                   [BinarySvm.from_dict(m) for m in doc["machines"]], doc["gamma"])


def fit_svm(X, y, cfg: SvmConfig = SvmConfig(), selected=None) -> TrainedModel:
    """Train a one-vs-one RBF SVM on the ``selected`` columns of ``X``.

    Columns are z-scored with training statistics first. With
    ``gamma="scale"``, gamma = 1 / (d * variance of the standardized data).
    """
    Z, y_idx, classes, selected, std = prepare_training(X, y, selected)
    gamma = cfg.resolve_gamma(Z)
    pairs, machines = [], []
    for p, q in combinations(range(len(classes)), 2):
        rows = (y_idx == p) | (y_idx == q)
        yb = np.where(y_idx[rows] == p, 1.0, -1.0)
        machines.append(BinarySvm(cfg.c, gamma, cfg.tol, cfg.max_passes).fit(Z[rows], yb))
        pairs.append((p, q))
    learner = SvmLearner(len(classes), pairs, machines, gamma)
    return TrainedModel("svm", classes, np.asarray(X).shape[1], selected, std, learner)
