"""Fitted-model container shared by the SVM and boosting learners."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..errors import ValidationError

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        # constant columns map to 0 instead of dividing by zero
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A learner plus the preprocessing it was trained behind.

    ``predict`` takes full-width feature rows: the model applies its own
    ``selected_features`` mask and standardizer before the learner sees them.
    """

    kind: str
    classes: np.ndarray
    n_features_in: int
    selected_features: np.ndarray
    standardizer: Standardizer
    learner: Any

    def prepare(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features_in:
            raise ValidationError(f"expected {self.n_features_in} feature columns, got shape {X.shape}")
        if not np.isfinite(X).all():
            raise ValidationError("non-finite feature values")
        return self.standardizer.transform(X[:, self.selected_features])

    def to_dict(self) -> dict:
        return {
            "format": "turnintent-model",
            "version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "classes": self.classes.tolist(),
            "n_features_in": self.n_features_in,
            "selected_features": self.selected_features.tolist(),
            "standardizer": {"mean": self.standardizer.mean.tolist(), "scale": self.standardizer.scale.tolist()},
            "learner": self.learner.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedModel":
        from .gbt import GbtLearner
        from .svm import SvmLearner

        if doc.get("format") != "turnintent-model" or doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValidationError("unsupported model document")
        learners = {"svm": SvmLearner, "gbt": GbtLearner}
        if doc["kind"] not in learners:
            raise ValidationError(f"unknown model kind {doc['kind']!r}")
        std = doc["standardizer"]
        return cls(
            kind=doc["kind"],
            classes=np.asarray(doc["classes"]),
            n_features_in=int(doc["n_features_in"]),
            selected_features=np.asarray(doc["selected_features"], dtype=np.int64),
            standardizer=Standardizer(np.asarray(std["mean"], dtype=float), np.asarray(std["scale"], dtype=float)),
            learner=learners[doc["kind"]].from_dict(doc["learner"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        return cls.from_dict(json.loads(text))


def prepare_training(X, y, selected=None, min_per_class: int = 2):
    """Validate a training set and fit the standardizer on the selected columns.

    Returns ``(Z, y_idx, classes, selected, standardizer)`` with ``y_idx``
    indexing into ``classes``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y) or len(X) == 0:
        raise ValidationError("X must be n x d with one label per row")
    if not np.isfinite(X).all():
        raise ValidationError("non-finite feature values")
    selected = np.arange(X.shape[1]) if selected is None else np.asarray(selected, dtype=np.int64)
    if selected.size == 0 or selected.min() < 0 or selected.max() >= X.shape[1]:
        raise ValidationError("selected feature indices out of range")
    classes, y_idx, counts = np.unique(y, return_inverse=True, return_counts=True)
    if len(classes) < 2:
        raise ValidationError("need at least 2 classes")
    if counts.min() < min_per_class:
        raise ValidationError(f"every class needs at least {min_per_class} samples")
    std = Standardizer.fit(X[:, selected])
    return std.transform(X[:, selected]), y_idx, classes, selected, std


def predict(model: TrainedModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Predicted labels and per-class scores.

    Scores are summed one-vs-one decision values for the SVM and class
    probabilities for boosting.
    """
    Z = model.prepare(X)
    idx, scores = model.learner.predict(Z)
    return model.classes[idx], scores
