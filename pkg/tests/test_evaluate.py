import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from turnintent import evaluate
from turnintent.config import EvalConfig, PipelineConfig
from turnintent.errors import ValidationError
from turnintent.evaluate import Cell, ConfusionMatrix, derive_seed, metrics, run_fold, run_sweep, stratified_kfold
from turnintent.learn import GbtConfig, RandomForestConfig

FAST = PipelineConfig(forest=RandomForestConfig(n_trees=25), gbt=GbtConfig(n_rounds=10))


# ------------------------------------------------------------------ metrics

def test_metrics_perfect():
    s = metrics(ConfusionMatrix(np.diag([10, 10, 10])))
    assert (s.accuracy, s.precision, s.recall) == (100.0, 100.0, 100.0)


def test_metrics_hand_example():
    s = metrics(ConfusionMatrix([[8, 1, 1], [2, 7, 1], [0, 1, 9]]))
    assert s.accuracy == pytest.approx(80.0, abs=1e-9)
    assert s.recall == pytest.approx(80.0, abs=1e-9)
    assert s.precision == pytest.approx((8 / 10 + 7 / 9 + 9 / 11) / 3 * 100, abs=1e-9)
    assert round(s.precision, 2) == 79.87


def test_metrics_undefined_class_flagged():
    s = metrics(ConfusionMatrix([[5, 0, 0], [3, 0, 0], [0, 0, 0]]))
    assert s.undefined_precision == (1, 2)
    assert s.undefined_recall == (2,)
    assert s.precision == pytest.approx((5 / 8) / 3 * 100)
    assert s.recall == pytest.approx((1 + 0 + 0) / 3 * 100)


def test_metrics_empty_rejected():
    with pytest.raises(ValidationError):
        metrics(ConfusionMatrix(np.zeros((3, 3), int)))


def test_confusion_validation():
    with pytest.raises(ValidationError):
        ConfusionMatrix([[1, -1, 0], [0, 0, 0], [0, 0, 0]])
    cm = ConfusionMatrix.from_labels([0, 1, 2, 2], [0, 2, 2, 1])
    assert cm.counts.tolist() == [[1, 0, 0], [0, 0, 1], [0, 1, 1]]
    assert cm.total == 4


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=9, max_size=9), st.permutations([0, 1, 2]))
def test_metrics_relabeling_invariant(cells, perm):
    counts = np.array(cells).reshape(3, 3)
    if counts.sum() == 0:
        counts[0, 0] = 1
    p = np.array(perm)
    a = metrics(ConfusionMatrix(counts))
    b = metrics(ConfusionMatrix(counts[np.ix_(p, p)]))
    assert a.accuracy == pytest.approx(b.accuracy, abs=1e-12)
    assert a.precision == pytest.approx(b.precision, abs=1e-12)
    assert a.recall == pytest.approx(b.recall, abs=1e-12)


def test_random_predictions_near_chance():
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1, 2], 1000)
    s = metrics(ConfusionMatrix.from_labels(y, rng.integers(0, 3, len(y))))
    assert abs(s.accuracy - 100 / 3) < 3


# -------------------------------------------------------------------- folds

def test_folds_one_per_class_each():
    labels = np.repeat([0, 1], 5)
    for train, test in stratified_kfold(labels, 5, seed=3):
        assert sorted(labels[test].tolist()) == [0, 1]
        assert len(train) == 8


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(5, 40), min_size=2, max_size=4), st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
def test_folds_partition_and_balance(counts, k, seed):
    labels = np.concatenate([np.full(c, i) for i, c in enumerate(counts)])
    folds = stratified_kfold(labels, k, seed)
    tests = np.concatenate([te for _, te in folds])
    assert np.array_equal(np.sort(tests), np.arange(len(labels)))
    sizes = [len(te) for _, te in folds]
    assert max(sizes) - min(sizes) <= 1
    for train, test in folds:
        assert not set(train) & set(test)
        assert len(train) + len(test) == len(labels)
        for cls, c in enumerate(counts):
            assert abs((labels[test] == cls).sum() - c / k) < 1
    assert all(np.array_equal(a[1], b[1]) for a, b in zip(folds, stratified_kfold(labels, k, seed)))


def test_folds_seed_matters():
    labels = np.repeat([0, 1, 2], 10)
    a = stratified_kfold(labels, 5, 0)
    b = stratified_kfold(labels, 5, 1)
    assert any(not np.array_equal(x[1], y[1]) for x, y in zip(a, b))


def test_folds_too_few():
    with pytest.raises(ValidationError):
        stratified_kfold([0, 0, 0, 1, 1, 1, 1, 1], 5)


def test_derive_seed_distinct():
    seeds = {derive_seed(0, lag, size, f) for lag in range(3) for size in range(3) for f in range(5)}
    assert len(seeds) == 45


# -------------------------------------------------------------------- sweep

def test_sweep_single_cell(small_dataset):
    rec, markers = small_dataset
    report = run_sweep(rec, markers, FAST, cells=[Cell(0, 1.5)], classifiers=["svm"])
    assert len(report.cells) == 1
    cell = report.get("svm", 0, 1.5)
    assert cell.status == "ok" and len(cell.folds) == 5
    assert cell.n_trials == 30
    assert cell.mean().accuracy >= 90


def test_sweep_mean_equals_fold_mean(small_dataset):
    rec, markers = small_dataset
    report = run_sweep(rec, markers, FAST, cells=[Cell(500, 1.0)])
    for cell in report.cells:
        folds = np.array([[f.accuracy, f.precision, f.recall] for f in cell.folds])
        np.testing.assert_allclose(cell.mean()[:3], folds.mean(axis=0), atol=1e-9)


def test_sweep_default_grid_shape(small_dataset):
    rec, markers = small_dataset
    # the 4 s lead-in covers the longest window (1 s lag + 2.5 s), so every cell runs
    cfg = PipelineConfig(forest=RandomForestConfig(n_trees=5), gbt=GbtConfig(n_rounds=2))
    report = run_sweep(rec, markers, cfg)
    assert len(report.cells) == 50
    assert {(c.lag_ms, c.size_s) for c in report.cells} == {(l, s) for l in (0, 250, 500, 750, 1000)
                                                             for s in (0.5, 1.0, 1.5, 2.0, 2.5)}
    table = report.to_table()
    assert "Accuracy (%)" in table and "Precision (%)" in table and "Recall (%)" in table
    assert len(report.to_csv().splitlines()) == 1 + 50 * 6


def test_sweep_skips_insufficient_cell(small_dataset):
    rec, markers = small_dataset
    few = [m for m in markers if m.label != 2] + [m for m in markers if m.label == 2][:3]
    report = run_sweep(rec, few, FAST, cells=[Cell(0, 1.0)], classifiers=["svm"])
    cell = report.cells[0]
    assert cell.status == "skipped" and cell.folds == [] and "straight=3" in cell.note
    assert "skipped" in report.to_table()


def test_sweep_skip_counts_underruns(small_dataset):
    rec, markers = small_dataset
    report = run_sweep(rec, markers, FAST, cells=[Cell(1000, 4.0)], classifiers=["svm"])
    cell = report.cells[0]
    assert cell.n_skipped_markers == 1
    assert cell.n_trials == 29


def test_sweep_same_folds_across_classifiers(small_dataset, monkeypatch):
    rec, markers = small_dataset
    seen = []
    real = evaluate.run_fold

    def spy(X, y, train, test, classifiers, *a, **k):
        seen.append((tuple(classifiers), tuple(test)))
        return real(X, y, train, test, classifiers, *a, **k)

    monkeypatch.setattr(evaluate, "run_fold", spy)
    run_sweep(rec, markers, FAST, cells=[Cell(0, 1.0), Cell(250, 1.0)])
    # one fold task trains both classifiers on the same split; cells share trials so share folds
    assert all(c == ("svm", "gbt") for c, _ in seen)
    assert [t for _, t in seen[:5]] == [t for _, t in seen[5:]]


def test_sweep_deterministic(small_dataset):
    rec, markers = small_dataset
    a = run_sweep(rec, markers, FAST, cells=[Cell(0, 1.0)])
    b = run_sweep(rec, markers, FAST, cells=[Cell(0, 1.0)])
    assert a.to_csv() == b.to_csv()


def test_sweep_parallel_identical(small_dataset):
    rec, markers = small_dataset
    cells = [Cell(0, 1.0), Cell(750, 0.5)]
    a = run_sweep(rec, markers, FAST, cells=cells, n_jobs=1)
    b = run_sweep(rec, markers, FAST, cells=cells, n_jobs=3)
    assert a.to_csv() == b.to_csv()
    assert a.to_table() == b.to_table()


def test_leakage_hook_per_fold(small_dataset):
    rec, markers = small_dataset
    log = []
    report = run_sweep(rec, markers, FAST, cells=[Cell(0, 1.0)],
                       row_usage=lambda cell, fold, stage, rows: log.append((fold, stage, np.asarray(rows))))
    assert report.cells[0].status == "ok"
    y = np.array([int(m.label) for m in markers])
    folds = stratified_kfold(y, 5, FAST.eval.seed)
    stages = {s for _, s, _ in log}
    assert stages == {"select", "standardize", "train"}
    for fold, stage, rows in log:
        assert not set(rows.tolist()) & set(folds[fold][1].tolist())


def test_leakage_hook_global_scope(small_dataset):
    rec, markers = small_dataset
    cfg = PipelineConfig(forest=RandomForestConfig(n_trees=10), gbt=GbtConfig(n_rounds=5),
                         eval=EvalConfig(selection_scope="global"))
    log = []
    run_sweep(rec, markers, cfg, cells=[Cell(0, 1.0)], classifiers=["svm"],
              row_usage=lambda cell, fold, stage, rows: log.append((fold, stage, len(rows))))
    assert (None, "select", 30) in log
    assert all(stage != "select" for fold, stage, _ in log if fold is not None)


def test_model_ignores_test_rows(small_dataset, monkeypatch):
    rec, markers = small_dataset
    from turnintent.epoching import extract_epochs
    from turnintent.features import featurize

    fm = featurize(extract_epochs(rec, markers, Cell(0, 1.0).window)[0])
    X, y = fm.values, fm.labels
    train, test = stratified_kfold(y, 5, 0)[2]
    models = []
    real_fit = evaluate._fit

    def capture(kind, *a, **k):
        m = real_fit(kind, *a, **k)
        models.append(m.to_json())
        return m

    monkeypatch.setattr(evaluate, "_fit", capture)
    seeds = {"forest": 1, "gbt": 2, "svm": 0}
    run_fold(X, y, train, test, ["svm", "gbt"], FAST, seeds)
    X2 = X.copy()
    X2[test] = np.random.default_rng(0).permutation(X2[test]) * 3 + 7
    run_fold(X2, y, train, test, ["svm", "gbt"], FAST, seeds)
    assert models[:2] == models[2:]


def test_report_csv_layout(small_dataset):
    rec, markers = small_dataset
    report = run_sweep(rec, markers, FAST, cells=[Cell(0, 1.5)], classifiers=["gbt"])
    lines = report.to_csv().splitlines()
    assert lines[0].startswith("classifier,lag_ms,size_s,window,fold,accuracy,precision,recall")
    assert len(lines) == 1 + 6
    assert lines[-1].split(",")[5] != "" and ",mean," in lines[-1]
    assert '"[-1.5, 0]"' in lines[1]
