"""Stratified k-fold evaluation over a lag x window-size grid.

Within every fold the standardizer, the forest-based feature ranking and
the classifier see training rows only. All randomness is derived from
``(seed, cell, fold)``, so the report is the same for any number of workers.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
from joblib import Parallel, delayed

from .config import PipelineConfig
from .epoching import WindowSpec, extract_epochs
from .errors import ValidationError
from .features import featurize
from .ingest import EventMarker, Label, Recording
from .learn import fit_gbt, fit_random_forest, fit_svm, predict, select_features

log = logging.getLogger(__name__)

N_CLASSES = len(Label)
METRICS = ("accuracy", "precision", "recall")


# ------------------------------------------------------------------- metrics


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValidationError("confusion matrix must be square")
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise ValidationError("confusion matrix counts must be non-negative integers")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @classmethod
    def from_labels(cls, y_true, y_pred, n_classes: int = N_CLASSES) -> "ConfusionMatrix":
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (np.asarray(y_true, dtype=int), np.asarray(y_pred, dtype=int)), 1)
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


class Scores(NamedTuple):
    accuracy: float
    precision: float
    recall: float
    undefined_precision: tuple = ()
    undefined_recall: tuple = ()


def metrics(cm: ConfusionMatrix) -> Scores:
    """Accuracy and macro-averaged one-vs-rest precision and recall, in percent.

    A class never predicted (or never present) contributes 0 to the macro
    precision (recall) and is listed in ``undefined_precision``
    (``undefined_recall``).
    """
    c = cm.counts
    total = c.sum()
    if total == 0:
        raise ValidationError("metrics of an empty confusion matrix")
    tp = np.diag(c).astype(float)
    predicted = c.sum(axis=0)
    actual = c.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    return Scores(
        float(100.0 * tp.sum() / total),
        float(100.0 * precision.mean()),
        float(100.0 * recall.mean()),
        tuple(int(k) for k in np.flatnonzero(predicted == 0)),
        tuple(int(k) for k in np.flatnonzero(actual == 0)),
    )


# --------------------------------------------------------------------- folds


def stratified_kfold(labels, k: int = 5, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Class-balanced k-fold split.

    Each class's indices are shuffled with ``seed`` and dealt round-robin;
    the dealing continues where the previous class stopped so fold sizes
    stay within one of each other.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValidationError("k must be >= 2")
    classes, counts = np.unique(labels, return_counts=True)
    if len(labels) == 0 or counts.min() < k:
        raise ValidationError(f"every class needs at least k={k} samples, got counts {dict(zip(classes.tolist(), counts.tolist()))}")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for cls in classes:
        idx = rng.permutation(np.flatnonzero(labels == cls))
        fold_of[idx] = (offset + np.arange(len(idx))) % k
        offset = (offset + len(idx)) % k
    all_idx = np.arange(len(labels))
    return [(all_idx[fold_of != f], all_idx[fold_of == f]) for f in range(k)]


# --------------------------------------------------------------------- sweep


@dataclass(frozen=True)
class Cell:
    lag_ms: float
    size_s: float

    @property
    def window(self) -> WindowSpec:
        return WindowSpec(self.lag_ms, self.size_s)

    @property
    def key(self) -> tuple[int, int]:
        return int(round(self.lag_ms * 1000)), int(round(self.size_s * 1_000_000))


@dataclass
class CellResult:
    classifier: str
    lag_ms: float
    size_s: float
    status: str = "ok"
    note: str = ""
    n_trials: int = 0
    n_skipped_markers: int = 0
    folds: list = field(default_factory=list)  # Scores per fold

    @property
    def window_label(self) -> str:
        return WindowSpec(self.lag_ms, self.size_s).label

    def mean(self) -> Scores | None:
        if not self.folds:
            return None
        arr = np.array([[f.accuracy, f.precision, f.recall] for f in self.folds])
        return Scores(*(float(v) for v in arr.mean(axis=0)))


@dataclass
class CvReport:
    seed: int
    k_folds: int
    cells: list = field(default_factory=list)

    def get(self, classifier: str, lag_ms: float, size_s: float) -> CellResult:
        for c in self.cells:
            if c.classifier == classifier and c.lag_ms == lag_ms and c.size_s == size_s:
                return c
        raise KeyError((classifier, lag_ms, size_s))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["classifier", "lag_ms", "size_s", "window", "fold", "accuracy", "precision", "recall",
                    "n_trials", "skipped_markers", "status", "note", "seed"])
        for c in self.cells:
            base = [c.classifier, repr(float(c.lag_ms)), repr(float(c.size_s)), c.window_label]
            tail = [c.n_trials, c.n_skipped_markers, c.status, c.note, self.seed]
            for i, f in enumerate(c.folds):
                w.writerow(base + [i, repr(f.accuracy), repr(f.precision), repr(f.recall)] + tail)
            m = c.mean()
            vals = ["", "", ""] if m is None else [repr(float(v)) for v in m[:3]]
            w.writerow(base + ["mean"] + vals + tail)
        return buf.getvalue()

    def to_table(self) -> str:
        """Aligned text table: metric x lag x classifier rows, window sizes as columns."""
        lags = sorted({c.lag_ms for c in self.cells})
        sizes = sorted({c.size_s for c in self.cells})
        clfs = list(dict.fromkeys(c.classifier for c in self.cells))
        lookup = {(c.classifier, c.lag_ms, c.size_s): c for c in self.cells}
        head = f"{'Metric':<14}{'Lag (ms)':>9}  {'Decoder':<8}" + "".join(f"{s:>9.2f}" for s in sizes)
        lines = [f"Mean over {self.k_folds} folds (seed {self.seed}); columns: window size (s)", head, "-" * len(head)]
        for mi, metric in enumerate(METRICS):
            for lag in lags:
                for clf in clfs:
                    row = f"{metric.capitalize() + ' (%)':<14}{lag:>9g}  {clf.upper():<8}"
                    for s in sizes:
                        cell = lookup.get((clf, lag, s))
                        m = cell.mean() if cell else None
                        row += f"{m[mi]:>9.2f}" if m is not None else f"{'-':>9}"
                    lines.append(row)
            lines.append("-" * len(head))
        skipped = [c for c in self.cells if c.status != "ok"]
        for c in skipped:
            lines.append(f"skipped: {c.classifier} lag={c.lag_ms:g} ms size={c.size_s:g} s ({c.note})")
        return "\n".join(lines) + "\n"


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, dtype=np.uint64)[0] >> 1)


def _fit(kind: str, X, y, cfg: PipelineConfig, selected, seed: int):
    if kind == "svm":
        return fit_svm(X, y, cfg.svm, selected)
    if kind == "gbt":
        return fit_gbt(X, y, replace(cfg.gbt, seed=seed), selected)
    raise ValidationError(f"unknown classifier {kind!r}")


def _rank_features(X, y, cfg: PipelineConfig, seed: int, n_jobs: int = 1) -> list[int]:
    forest = fit_random_forest(X, y, replace(cfg.forest, seed=seed), n_jobs=n_jobs)
    return select_features(forest.importance, min(cfg.eval.n_select, X.shape[1]))


def run_fold(X, y, train, test, classifiers: Sequence[str], cfg: PipelineConfig, seeds: dict,
             global_selection=None):
    """Train/test one fold. Returns (scores per classifier, row-usage records).

    Usage records are ``(stage, rows)`` for every call that consumed rows.
    """
    usage = []
    if global_selection is None:
        usage.append(("select", train))
        selected = _rank_features(X[train], y[train], cfg, seeds["forest"])
    else:
        selected = global_selection
    out = {}
    for kind in classifiers:
        usage.append(("standardize", train))
        usage.append(("train", train))
        model = _fit(kind, X[train], y[train], cfg, selected, seeds[kind])
        pred, _ = predict(model, X[test])
        out[kind] = metrics(ConfusionMatrix.from_labels(y[test], pred))
    return out, usage


def run_sweep(
    rec: Recording,
    markers: Sequence[EventMarker],
    cfg: PipelineConfig = PipelineConfig(),
    cells: Sequence[Cell] | None = None,
    classifiers: Sequence[str] | None = None,
    n_jobs: int = 1,
    row_usage: Callable | None = None,
) -> CvReport:
    """Cross-validate every (classifier, lag, size) cell.

    Parameters
    ----------
    rec : Recording
        Preprocessed recording.
    markers : list of EventMarker
    cfg : PipelineConfig
        Learner settings, fold count, seed and selection scope. Its window
        grid is used when ``cells`` is None.
    cells : list of Cell, optional
    classifiers : list of str, optional
        Defaults to ``cfg.classifiers``.
    n_jobs : int
        Worker processes; results do not depend on it.
    row_usage : callable, optional
        ``row_usage(cell, fold, stage, rows)`` is called for every fit-time
        use of trial rows (stages "select", "standardize", "train"), with
        row indices into the cell's trial list. Meant for leakage audits.

    Cells with fewer than ``k`` trials of some class are reported as skipped.
    """
    classifiers = list(classifiers or cfg.classifiers)
    if cells is None:
        cells = [Cell(lag, size) for lag in cfg.windows.lags_ms for size in cfg.windows.sizes_s]
    k, seed = cfg.eval.k_folds, cfg.eval.seed
    report = CvReport(seed=seed, k_folds=k)

    tasks, prepared = [], []
    for cell in cells:
        epochs, skipped = extract_epochs(rec, markers, cell.window)
        results = {kind: CellResult(kind, cell.lag_ms, cell.size_s, n_trials=len(epochs), n_skipped_markers=skipped)
                   for kind in classifiers}
        report.cells.extend(results.values())
        labels = np.array([int(e.label) for e in epochs], dtype=int)
        counts = np.bincount(labels, minlength=N_CLASSES) if len(labels) else np.zeros(N_CLASSES, int)
        if counts.min() < k:
            note = "insufficient trials per class: " + ", ".join(f"{Label(i).token}={n}" for i, n in enumerate(counts))
            log.warning("skipping lag=%g size=%g: %s", cell.lag_ms, cell.size_s, note)
            for r in results.values():
                r.status, r.note = "skipped", note
            continue
        fm = featurize(epochs, rec.channel_names)
        X, y = fm.values, fm.labels
        folds = stratified_kfold(y, k, seed)
        global_sel = None
        if cfg.eval.selection_scope == "global":
            if row_usage is not None:
                row_usage(cell, None, "select", np.arange(len(y)))
            global_sel = _rank_features(X, y, cfg, derive_seed(seed, *cell.key, 1 << 20))
        prepared.append((cell, results))
        for f, (train, test) in enumerate(folds):
            seeds = {"forest": derive_seed(seed, *cell.key, f, 0), "gbt": derive_seed(seed, *cell.key, f, 1), "svm": 0}
            tasks.append((len(prepared) - 1, f, X, y, train, test, seeds, global_sel))

    runner = delayed(run_fold)
    jobs = [runner(X, y, tr, te, classifiers, cfg, seeds, gs) for _, _, X, y, tr, te, seeds, gs in tasks]
    if n_jobs == 1:
        outputs = [fn(*a, **kw) for fn, a, kw in jobs]
    else:
        outputs = Parallel(n_jobs=n_jobs)(jobs)

    for (ci, f, *_), (scores, usage) in zip(tasks, outputs):
        cell, results = prepared[ci]
        for kind in classifiers:
            results[kind].folds.append(scores[kind])
        if row_usage is not None:
            for stage, rows in usage:
                row_usage(cell, f, stage, rows)
    return report
