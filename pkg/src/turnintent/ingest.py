"""Data model, file formats and the synthetic recording generator.

Recordings persist as CSV (one sample per row, one channel per column) and
event markers as a JSON array of ``{"onset_sample": int, "label": str}``.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import ValidationError

__all__ = [
    "Label",
    "Recording",
    "EventMarker",
    "MontageTable",
    "SynthSpec",
    "load_montage",
    "read_recording",
    "write_recording",
    "read_markers",
    "write_markers",
    "synthesize",
]


class Label(enum.IntEnum):
    LEFT = 0
    RIGHT = 1
    STRAIGHT = 2

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: str) -> "Label":
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ValidationError(f"unknown label {value!r}; expected left, right or straight") from None


@dataclass(frozen=True, eq=False)
class Recording:
    """Continuous multichannel recording.

    Attributes
    ----------
    data : ndarray, shape (C, T)
        Samples in microvolts.
    fs : float
        Sampling rate in Hz.
    channel_names : tuple of str
    electrode_pos : ndarray, shape (C, 3)
        Unit-sphere electrode coordinates.
    bad_channels : frozenset of int
        Channels flagged for interpolation.
    """

    data: np.ndarray
    fs: float
    channel_names: tuple
    electrode_pos: np.ndarray
    bad_channels: frozenset = frozenset()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        pos = np.asarray(self.electrode_pos, dtype=float)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "electrode_pos", pos)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        object.__setattr__(self, "bad_channels", frozenset(int(c) for c in self.bad_channels))
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError(f"recording data must be a non-empty C x T matrix, got shape {data.shape}")
        n_ch = data.shape[0]
        if not self.fs > 0:
            raise ValidationError(f"sampling rate must be positive, got {self.fs}")
        if len(self.channel_names) != n_ch:
            raise ValidationError(f"{len(self.channel_names)} channel names for {n_ch} channels")
        if pos.shape != (n_ch, 3):
            raise ValidationError(f"electrode positions must have shape ({n_ch}, 3), got {pos.shape}")
        norms = np.linalg.norm(pos, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValidationError("electrode positions must lie on the unit sphere")
        if any(c < 0 or c >= n_ch for c in self.bad_channels):
            raise ValidationError(f"bad channel index out of range 0..{n_ch - 1}")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def replace(self, **changes) -> "Recording":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class EventMarker:
    onset_sample: int
    label: Label


@dataclass(frozen=True, eq=False)
class MontageTable:
    names: tuple
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "names", tuple(self.names))
        if len(set(self.names)) != len(self.names):
            raise ValidationError("montage channel names must be unique")
        if pos.shape != (len(self.names), 3):
            raise ValidationError("montage positions must be N x 3")
        if np.any(np.abs(np.linalg.norm(pos, axis=1) - 1.0) > 1e-6):
            raise ValidationError("montage positions must lie on the unit sphere")

    def __len__(self):
        return len(self.names)

    def lookup(self, names: Sequence[str]) -> np.ndarray:
        index = {n: i for i, n in enumerate(self.names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise ValidationError(f"unknown channel {missing[0]!r} (not in montage)")
        return self.positions[[index[n] for n in names]]


def load_montage(path: str | Path | None = None) -> MontageTable:
    """Load a montage CSV (``channel,x,y,z``); defaults to the bundled 31-channel table.

    Coordinates are renormalised onto the unit sphere after parsing so that
    rounding in the file does not trip the unit-norm invariant.
    """
    if path is None:
        text = resources.files("turnintent").joinpath("data/montage_31.csv").read_text()
    else:
        text = Path(path).read_text()
    rows = list(csv.DictReader(text.splitlines()))
    names = [r["channel"].strip() for r in rows]
    pos = np.array([[float(r["x"]), float(r["y"]), float(r["z"])] for r in rows])
    pos /= np.linalg.norm(pos, axis=1, keepdims=True)
    return MontageTable(names, pos)


# ---------------------------------------------------------------- recordings


def read_recording(path: str | Path, fs: float, montage: MontageTable | None = None) -> Recording:
    """Read a recording CSV written one sample per row.

    Parameters
    ----------
    path : path-like
        CSV file whose header row holds the channel names.
    fs : float
        Sampling rate in Hz (not stored in the file).
    montage : MontageTable, optional
        Electrode geometry; the bundled 31-channel table by default.

    Returns
    -------
    Recording
        Data transposed to channels x samples, no bad channels.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"recording file not found: {path}")
    montage = montage or load_montage()
    with path.open(newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise ValidationError(f"{path}: empty file, expected a header row of channel names")
    header = [h.strip() for h in header]
    positions = montage.lookup(header)

    try:
        frame = pd.read_csv(path, dtype=np.float64, engine="c", float_precision="round_trip")
        values = frame.to_numpy()
        ok = values.shape[1] == len(header) and np.isfinite(values).all()
    except (ValueError, pd.errors.ParserError):
        ok = False
    if not ok:
        # slow path: locate the first offending cell for the error message
        values = _parse_strict(path, len(header))
    if values.shape[0] == 0:
        raise ValidationError(f"{path}: no sample rows")
    return Recording(np.ascontiguousarray(values.T), fs, header, positions)


def _parse_strict(path: Path, n_cols: int) -> np.ndarray:
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != n_cols:
                raise ValidationError(f"{path}: ragged row at line {lineno} ({len(row)} fields, expected {n_cols})")
            parsed = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    v = math.nan
                if not math.isfinite(v):
                    raise ValidationError(f"{path}: non-numeric cell {cell!r} at line {lineno} (sample row {lineno - 1}), column {col}")
                parsed.append(v)
            rows.append(parsed)
    return np.array(rows, dtype=float).reshape(-1, n_cols)


def write_recording(rec: Recording, path: str | Path, precision: int = 9) -> None:
    """Write ``rec`` as CSV with ``precision`` significant digits (at least 9)."""
    if precision < 9:
        raise ValidationError("recording CSV needs at least 9 significant digits")
    frame = pd.DataFrame(rec.data.T, columns=list(rec.channel_names))
    frame.to_csv(path, index=False, float_format=f"%.{precision}g", lineterminator="\n")


# ------------------------------------------------------------------- markers


def read_markers(path: str | Path, recording: Recording) -> list[EventMarker]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"marker file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return parse_markers(raw, recording.n_samples)


def parse_markers(raw, n_samples: int) -> list[EventMarker]:
    if not isinstance(raw, list):
        raise ValidationError("marker document must be a JSON array")
    markers = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or set(item) != {"onset_sample", "label"}:
            raise ValidationError(f"marker {i}: expected keys onset_sample and label")
        onset = item["onset_sample"]
        if isinstance(onset, bool) or not isinstance(onset, int):
            raise ValidationError(f"marker {i}: onset_sample must be an integer")
        if not 0 <= onset < n_samples:
            raise ValidationError(f"marker {i}: onset out of range [0, {n_samples})")
        markers.append(EventMarker(onset, Label.parse(item["label"])))
    markers.sort(key=lambda m: m.onset_sample)
    return markers


def write_markers(markers: Sequence[EventMarker], path: str | Path) -> None:
    doc = [{"onset_sample": int(m.onset_sample), "label": m.label.token} for m in markers]
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


# ----------------------------------------------------------------- synthesis

DEFAULT_CLASS_CHANNELS = {
    Label.LEFT: ("C4", "FC2", "CP2", "FC6"),
    Label.RIGHT: ("C3", "FC1", "CP1", "FC5"),
    Label.STRAIGHT: ("Cz", "Fz", "Pz"),
}
DEFAULT_CLASS_FREQS = {Label.LEFT: 10.0, Label.RIGHT: 14.0, Label.STRAIGHT: 22.0}


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic class-conditioned recording.

    ``snr`` is the peak amplitude of the class signature relative to the unit
    background noise SD. The signature occupies ``[onset - signature_s, onset)``.
    Consecutive onsets are ``trial_length_s`` apart.
    """

    n_trials_per_class: int = 50
    fs: float = 500.0
    trial_length_s: float = 4.0
    snr: float = 5.0
    seed: int = 0
    class_channels: Mapping = field(default_factory=lambda: dict(DEFAULT_CLASS_CHANNELS))
    class_freqs: Mapping = field(default_factory=lambda: dict(DEFAULT_CLASS_FREQS))
    signature_s: float = 2.5
    lead_in_s: float = 4.0

    def __post_init__(self):
        cc = {Label.parse(k) if isinstance(k, str) else Label(k): tuple(v) for k, v in self.class_channels.items()}
        cf = {Label.parse(k) if isinstance(k, str) else Label(k): float(v) for k, v in self.class_freqs.items()}
        object.__setattr__(self, "class_channels", cc)
        object.__setattr__(self, "class_freqs", cf)
        self.validate()

    def validate(self) -> None:
        if isinstance(self.n_trials_per_class, bool) or not isinstance(self.n_trials_per_class, int) \
                or self.n_trials_per_class < 1:
            raise ValidationError("n_trials_per_class must be a positive integer")
        if not self.fs > 0:
            raise ValidationError("fs must be positive")
        if not self.snr >= 0:
            raise ValidationError(f"snr must be >= 0, got {self.snr}")
        if not self.signature_s > 0:
            raise ValidationError("signature_s must be positive")
        if self.trial_length_s < 3.0:
            raise ValidationError("trial_length_s must be >= 3 (minimum onset spacing)")
        if self.trial_length_s < self.signature_s:
            raise ValidationError("trial_length_s must cover signature_s")
        if self.lead_in_s < self.signature_s:
            raise ValidationError("lead_in_s must cover signature_s")
        if set(self.class_channels) != set(Label) or set(self.class_freqs) != set(Label):
            raise ValidationError("class_channels and class_freqs need an entry for every class")
        for lab, f in self.class_freqs.items():
            if not 0 < f < self.fs / 2:
                raise ValidationError(f"class_freqs[{lab.token}] must lie in (0, fs/2)")
        if len(set(self.class_freqs.values())) != len(Label):
            raise ValidationError("class_freqs must be distinct")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SynthSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown synth spec key(s): {', '.join(sorted(unknown))}")
        return cls(**doc)


def synthesize(spec: SynthSpec, montage: MontageTable | None = None) -> tuple[Recording, list[EventMarker]]:
    """Generate unit-SD Gaussian noise with class-specific pre-onset oscillations.

    Each trial adds ``snr * sin(2 pi f_class t + phase)`` (random phase) to the
    class's channels over ``[onset - signature_s, onset)``. Output is a pure
    function of ``spec``.
    """
    montage = montage or load_montage()
    names = list(montage.names)
    for lab, chans in spec.class_channels.items():
        for ch in chans:
            if ch not in names:
                raise ValidationError(f"class_channels[{lab.token}]: unknown channel {ch!r}")

    rng = np.random.default_rng(spec.seed)
    fs = spec.fs
    n_trials = spec.n_trials_per_class * len(Label)
    spacing = int(round(spec.trial_length_s * fs))
    lead = int(round(spec.lead_in_s * fs))
    sig_len = int(round(spec.signature_s * fs))
    n_samples = lead + n_trials * spacing

    labels = rng.permutation(np.repeat(np.arange(len(Label)), spec.n_trials_per_class))
    data = rng.standard_normal((len(names), n_samples))
    phases = rng.uniform(0.0, 2 * np.pi, size=n_trials)

    t = np.arange(sig_len) / fs
    markers = []
    for k, (lab_idx, phase) in enumerate(zip(labels, phases)):
        lab = Label(int(lab_idx))
        onset = lead + k * spacing
        if spec.snr > 0:
            wave = spec.snr * np.sin(2 * np.pi * spec.class_freqs[lab] * t + phase)
            rows = [names.index(ch) for ch in spec.class_channels[lab]]
            data[rows, onset - sig_len:onset] += wave
        markers.append(EventMarker(onset, lab))

    rec = Recording(data, fs, names, montage.positions)
    return rec, markers
