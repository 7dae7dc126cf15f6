"""Cleaning chain: high-pass, flat-channel rejection, burst capping, CAR,
spherical-spline repair of rejected channels.

The chain order is fixed (see :func:`preprocess`). Every step keeps the
(C, T) shape and the sampling rate.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy import signal

from .errors import NumericError, ValidationError
from .ingest import Recording

log = logging.getLogger(__name__)

BUTTER_ORDER = 4
MAD_TO_SD = 1.4826


@dataclass(frozen=True)
class PreprocessConfig:
    hp_cutoff_hz: float = 0.5
    flat_seconds: float = 5.0
    flat_eps: float = 1e-7
    burst_sd_threshold: float = 20.0
    burst_window_s: float = 0.5
    spline_order_m: int = 4
    spline_terms: int = 7
    spline_reg: float = 1e-5

    def __post_init__(self):
        if not self.hp_cutoff_hz > 0:
            raise ValidationError("preprocess.hp_cutoff_hz must be > 0")
        if not self.flat_seconds > 0:
            raise ValidationError("preprocess.flat_seconds must be > 0")
        if not self.flat_eps >= 0:
            raise ValidationError("preprocess.flat_eps must be >= 0")
        if not self.burst_sd_threshold > 0:
            raise ValidationError("preprocess.burst_sd_threshold must be > 0")
        if not self.burst_window_s > 0:
            raise ValidationError("preprocess.burst_window_s must be > 0")
        if int(self.spline_order_m) != self.spline_order_m or self.spline_order_m < 2:
            raise ValidationError("preprocess.spline_order_m must be an integer >= 2")
        if int(self.spline_terms) != self.spline_terms or self.spline_terms < 1:
            raise ValidationError("preprocess.spline_terms must be an integer >= 1")
        if not self.spline_reg >= 0:
            raise ValidationError("preprocess.spline_reg must be >= 0")


@dataclass
class PreprocessReport:
    flat_channels: list = field(default_factory=list)
    interpolated_channels: list = field(default_factory=list)
    burst_windows: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def highpass(rec: Recording, cutoff: float, order: int = BUTTER_ORDER) -> Recording:
    """Zero-phase Butterworth high-pass (forward-backward, odd reflection padding)."""
    nyquist = rec.fs / 2
    if not 0 < cutoff < nyquist:
        raise ValidationError(f"high-pass cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz")
    sos = signal.butter(order, cutoff, btype="highpass", fs=rec.fs, output="sos")
    padlen = min(3 * order, rec.n_samples - 1)
    out = signal.sosfiltfilt(sos, rec.data, axis=1, padtype="odd", padlen=padlen)
    return rec.replace(data=out)


def detect_flat_channels(rec: Recording, flat_seconds: float = 5.0, flat_eps: float = 1e-7) -> set:
    """Indices of channels holding a flat stretch longer than ``flat_seconds``.

    A stretch is flat when every successive difference is at most ``flat_eps``.
    """
    min_len = flat_seconds * rec.fs
    if min_len < 2:
        raise ValidationError("flat_seconds * fs must be at least 2 samples")
    flat = set()
    steady = np.abs(np.diff(rec.data, axis=1)) <= flat_eps
    for ch, mask in enumerate(steady):
        if _longest_true_run(mask) + 1 > min_len:
            flat.add(ch)
    return flat


def _longest_true_run(mask: np.ndarray) -> int:
    if not mask.any():
        return 0
    padded = np.concatenate(([0], mask.astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    return int((edges[1::2] - edges[0::2]).max())


def suppress_bursts(rec: Recording, cfg: PreprocessConfig = PreprocessConfig(), counts: dict | None = None) -> Recording:
    """Cap short high-amplitude bursts.

    Per channel, the baseline SD is 1.4826 x MAD of the whole channel. Each
    non-overlapping window of ``burst_window_s`` (the trailing partial window
    included) whose RMS exceeds ``burst_sd_threshold`` x baseline is rescaled
    to exactly that RMS. Other samples are left untouched.

    ``counts``, if given, receives ``{channel: number of repaired windows}``.
    """
    win = max(1, int(round(cfg.burst_window_s * rec.fs)))
    if rec.n_samples <= 10 * win:
        raise ValidationError("burst suppression needs a recording longer than 10 windows")
    out = rec.data.copy()
    for ch, x in enumerate(rec.data):
        sd = MAD_TO_SD * np.median(np.abs(x - np.median(x)))
        if sd == 0:
            continue
        cap = cfg.burst_sd_threshold * sd
        for start in range(0, rec.n_samples, win):
            seg = x[start:start + win]
            rms = np.sqrt(np.mean(seg * seg))
            if rms > cap:
                out[ch, start:start + win] = seg * (cap / rms)
                if counts is not None:
                    counts[ch] = counts.get(ch, 0) + 1
    return rec.replace(data=out)


def common_average_reference(rec: Recording) -> Recording:
    """Subtract the instantaneous mean of the good channels from every channel."""
    if rec.n_channels < 2:
        raise ValidationError("common average reference needs at least 2 channels")
    good = [c for c in range(rec.n_channels) if c not in rec.bad_channels]
    if not good:
        raise ValidationError("common average reference: all channels are bad")
    ref = rec.data[good].mean(axis=0)
    return rec.replace(data=rec.data - ref)


def spline_kernel(cos_angle: np.ndarray, m: int = 4, n_terms: int = 7) -> np.ndarray:
    """g(x) = sum_{n=1..n_terms} (2n+1) / (n^m (n+1)^m) P_n(x)."""
    n = np.arange(1, n_terms + 1, dtype=float)
    coefs = np.concatenate(([0.0], (2 * n + 1) / (n ** m * (n + 1) ** m)))
    return legendre.legval(np.clip(cos_angle, -1.0, 1.0), coefs)


def interpolation_matrix(pos_good: np.ndarray, pos_bad: np.ndarray, cfg: PreprocessConfig = PreprocessConfig()) -> np.ndarray:
    """Linear map from good-channel values to spline estimates at ``pos_bad``.

    Solves the augmented system ``[[G + reg I, 1], [1^T, 0]]`` once for all
    samples.
    """
    n_good = len(pos_good)
    if n_good < 4:
        raise ValidationError(f"spherical interpolation needs at least 4 good channels, got {n_good}")
    m, terms = int(cfg.spline_order_m), int(cfg.spline_terms)
    g = spline_kernel(pos_good @ pos_good.T, m, terms)
    a = np.zeros((n_good + 1, n_good + 1))
    a[:n_good, :n_good] = g + cfg.spline_reg * np.eye(n_good)
    a[:n_good, n_good] = 1.0
    a[n_good, :n_good] = 1.0
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > 1e13:
        raise NumericError(f"spherical spline system is singular (condition estimate {cond:.3g})")
    rhs = np.vstack([np.eye(n_good), np.zeros((1, n_good))])
    weights = np.linalg.solve(a, rhs)  # (n_good + 1) x n_good: coefficients per unit input
    g_bad = np.hstack([spline_kernel(pos_bad @ pos_good.T, m, terms), np.ones((len(pos_bad), 1))])
    return g_bad @ weights


def interpolate_channels(rec: Recording, bad=None, cfg: PreprocessConfig = PreprocessConfig()) -> Recording:
    """Rebuild ``bad`` channels (default: ``rec.bad_channels``) by spherical splines.

    Good channels pass through unchanged; the returned recording has no bad
    channels left.
    """
    bad = sorted(rec.bad_channels if bad is None else {int(b) for b in bad})
    if not bad:
        return rec.replace(bad_channels=frozenset())
    if any(b < 0 or b >= rec.n_channels for b in bad):
        raise ValidationError("bad channel index out of range")
    good = [c for c in range(rec.n_channels) if c not in set(bad)]
    weights = interpolation_matrix(rec.electrode_pos[good], rec.electrode_pos[bad], cfg)
    out = rec.data.copy()
    out[bad] = weights @ rec.data[good]
    return rec.replace(data=out, bad_channels=frozenset())


def preprocess(rec: Recording, cfg: PreprocessConfig = PreprocessConfig()) -> tuple[Recording, PreprocessReport]:
    """Run high-pass -> flat detection -> burst capping -> CAR -> interpolation.

    Flat-line detection reads the unfiltered input: filter transients would
    otherwise break up flat stretches. It only produces the rejection mask, so
    the data path order is unaffected.
    """
    report = PreprocessReport()
    flat = detect_flat_channels(rec, cfg.flat_seconds, cfg.flat_eps)
    out = highpass(rec, cfg.hp_cutoff_hz)
    report.flat_channels = [out.channel_names[c] for c in sorted(flat)]
    if flat:
        log.info("rejected flat channels: %s", ", ".join(report.flat_channels))
    out = out.replace(bad_channels=out.bad_channels | flat)
    counts: dict = {}
    out = suppress_bursts(out, cfg, counts)
    report.burst_windows = {out.channel_names[c]: n for c, n in sorted(counts.items())}
    out = common_average_reference(out)
    report.interpolated_channels = [out.channel_names[c] for c in sorted(out.bad_channels)]
    out = interpolate_channels(out, cfg=cfg)
    return out, report
