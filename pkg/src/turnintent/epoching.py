"""Time-lagged pre-onset windows.

A window with lag ``L`` and size ``S`` covers ``[onset - (L + S), onset - L)``
in time, half-open in samples, so at lag 0 it ends exactly at the onset.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .ingest import EventMarker, Label, Recording

DEFAULT_LAGS_MS = (0, 250, 500, 750, 1000)
DEFAULT_SIZES_S = (0.5, 1.0, 1.5, 2.0, 2.5)


@dataclass(frozen=True)
class WindowSpec:
    lag_ms: float
    size_s: float

    def __post_init__(self):
        if not self.lag_ms >= 0:
            raise ValidationError(f"lag_ms must be >= 0, got {self.lag_ms}")
        if not self.size_s > 0:
            raise ValidationError(f"size_s must be > 0, got {self.size_s}")

    def n_samples(self, fs: float) -> int:
        # round() is half-to-even
        return int(round(self.size_s * fs))

    def offset(self, fs: float) -> int:
        """Samples from window start to onset."""
        return int(round((self.lag_ms / 1000.0 + self.size_s) * fs))

    @property
    def label(self) -> str:
        """Closed-interval label used in reports, e.g. ``[-2.5, -0.5]``."""
        end = -self.lag_ms / 1000.0 + 0.0  # no -0
        return f"[{end - self.size_s:g}, {end:g}]"


@dataclass(frozen=True, eq=False)
class Epoch:
    data: np.ndarray
    label: Label
    spec: WindowSpec
    onset_sample: int


def window_bounds(onset: int, spec: WindowSpec, fs: float) -> tuple[int, int]:
    start = onset - spec.offset(fs)
    return start, start + spec.n_samples(fs)


def extract_epochs(rec: Recording, markers: Sequence[EventMarker], spec: WindowSpec) -> tuple[list[Epoch], int]:
    """Cut one window per marker.

    Returns
    -------
    epochs : list of Epoch
        In marker order, for markers whose window lies inside the recording.
    skipped : int
        Number of markers dropped because the window starts before sample 0.
    """
    epochs, skipped = [], 0
    for m in markers:
        start, stop = window_bounds(m.onset_sample, spec, rec.fs)
        if start < 0:
            skipped += 1
            continue
        if stop > rec.n_samples:
            raise ValidationError(f"marker at {m.onset_sample} lies beyond the recording end")
        epochs.append(Epoch(rec.data[:, start:stop].copy(), m.label, spec, m.onset_sample))
    return epochs, skipped
