"""Per-channel statistical and Hjorth features.

Eight features per channel, in this order: mean, median, sd, skew, kurtosis,
activity, mobility, complexity. All moments use 1/n normalisation, skew is
the Fisher-Pearson g1 and kurtosis the excess g2. Derivatives are first
differences; the 1/dt factor cancels in mobility and complexity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd

from .errors import ValidationError
from .ingest import Label

FEATURE_NAMES = ("mean", "median", "sd", "skew", "kurtosis", "activity", "mobility", "complexity")
N_FEATURES = len(FEATURE_NAMES)


class StatFeatures(NamedTuple):
    mean: float
    median: float
    sd: float
    skew: float
    kurtosis: float
    degenerate: bool


class HjorthParams(NamedTuple):
    activity: float
    mobility: float
    complexity: float
    degenerate: bool


def _central_moments(x: np.ndarray):
    """Mean and 2nd-4th central moments along the last axis, plus a zero-variance mask."""
    mu = x.mean(axis=-1, keepdims=True)
    d = x - mu
    d2 = d * d
    m2 = d2.mean(axis=-1)
    m3 = (d2 * d).mean(axis=-1)
    m4 = (d2 * d2).mean(axis=-1)
    # float noise floor for a constant row
    scale = np.abs(x).max(axis=-1) if x.shape[-1] else np.zeros(x.shape[:-1])
    flat = m2 <= x.shape[-1] * (np.finfo(float).eps * scale) ** 2
    return mu[..., 0], m2, m3, m4, flat


def _channel_features(x: np.ndarray):
    """Features for every row of ``x`` (rows x samples) -> (rows x 8, degenerate mask)."""
    mean, m2, m3, m4, flat = _central_moments(x)
    safe_m2 = np.where(flat, 1.0, m2)
    skew = np.where(flat, 0.0, m3 / safe_m2 ** 1.5)
    kurt = np.where(flat, 0.0, m4 / safe_m2 ** 2 - 3.0)
    sd = np.where(flat, 0.0, np.sqrt(m2))

    dx = np.diff(x, axis=-1)
    ddx = np.diff(dx, axis=-1)
    _, v1, _, _, flat1 = _central_moments(dx)
    _, v2, _, _, _ = _central_moments(ddx)
    activity = np.where(flat, 0.0, m2)
    mobility = np.where(flat, 0.0, np.sqrt(v1 / safe_m2))
    deriv_mobility = np.sqrt(v2 / np.where(flat1, 1.0, v1))
    complexity = np.where(flat | flat1, 0.0, deriv_mobility / np.where(mobility > 0, mobility, 1.0))

    out = np.stack([mean, np.median(x, axis=-1), sd, skew, kurt, activity, mobility, complexity], axis=-1)
    return out, flat | flat1


def stat_features(x) -> StatFeatures:
    """Mean, median, population SD, skew (g1) and excess kurtosis (g2).

    A constant input reports skew = kurtosis = 0 with ``degenerate=True``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 4:
        raise ValidationError("stat_features needs a 1-D signal of at least 4 samples")
    if not np.isfinite(x).all():
        raise ValidationError("stat_features: non-finite samples")
    mean, m2, m3, m4, flat = _central_moments(x)
    if flat:
        return StatFeatures(float(mean), float(np.median(x)), 0.0, 0.0, 0.0, True)
    return StatFeatures(float(mean), float(np.median(x)), float(np.sqrt(m2)),
                        float(m3 / m2 ** 1.5), float(m4 / m2 ** 2 - 3.0), False)


def hjorth(x) -> HjorthParams:
    """Hjorth activity, mobility and complexity of a 1-D signal.

    Zero variance gives (0, 0, 0); a signal whose first difference is
    constant keeps its mobility but reports complexity 0. Both cases set
    ``degenerate``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise ValidationError("hjorth needs a 1-D signal of at least 3 samples")
    if not np.isfinite(x).all():
        raise ValidationError("hjorth: non-finite samples")
    feats, degenerate = _channel_features(x[None, :])
    a, m, c = feats[0, 5:]
    return HjorthParams(float(a), float(m), float(c), bool(degenerate[0]))


@dataclass(eq=False)
class FeatureMatrix:
    """Trials x features, with labels and an optional selection."""

    values: np.ndarray
    names: list
    labels: np.ndarray
    selected: np.ndarray | None = None
    degenerate: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self, path: str | Path) -> None:
        frame = pd.DataFrame(self.values, columns=self.names)
        frame["label"] = [Label(int(v)).token for v in self.labels]
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureMatrix":
        frame = pd.read_csv(path, float_precision="round_trip")
        if "label" not in frame.columns:
            raise ValidationError(f"{path}: missing label column")
        labels = np.array([int(Label.parse(v)) for v in frame.pop("label")], dtype=int)
        return cls(frame.to_numpy(dtype=float), list(frame.columns), labels)


def feature_names(channel_names: Sequence[str]) -> list[str]:
    return [f"{ch}_{feat}" for ch in channel_names for feat in FEATURE_NAMES]


def featurize(epochs, channel_names: Sequence[str] | None = None) -> FeatureMatrix:
    """Build the (n_epochs x 8C) feature matrix, channel-major.

    No standardisation happens here; that is part of each learner's fit.
    """
    if not epochs:
        raise ValidationError("featurize: no epochs")
    shape = epochs[0].data.shape
    if any(e.data.shape != shape for e in epochs):
        raise ValidationError("featurize: epochs have mixed shapes")
    n_ch, n_samp = shape
    if n_samp < 4:
        raise ValidationError("featurize: epochs need at least 4 samples")
    if channel_names is None:
        channel_names = [f"ch{i}" for i in range(n_ch)]
    if len(channel_names) != n_ch:
        raise ValidationError("featurize: channel name count does not match epoch channels")
    stack = np.stack([e.data for e in epochs])
    if not np.isfinite(stack).all():
        raise ValidationError("featurize: non-finite samples")
    feats, degenerate = _channel_features(stack)
    values = feats.reshape(len(epochs), n_ch * N_FEATURES)
    labels = np.array([int(e.label) for e in epochs], dtype=int)
    return FeatureMatrix(values, feature_names(channel_names), labels, degenerate=degenerate)
