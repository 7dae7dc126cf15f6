import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from turnintent.epoching import Epoch, WindowSpec
from turnintent.errors import ValidationError
from turnintent.features import FEATURE_NAMES, FeatureMatrix, feature_names, featurize, hjorth, stat_features
from turnintent.ingest import Label


def brute_hjorth(x):
    d1, d2 = np.diff(x), np.diff(x, 2)
    mob = np.sqrt(np.var(d1) / np.var(x))
    return np.var(x), mob, np.sqrt(np.var(d2) / np.var(d1)) / mob


def test_stat_simple():
    s = stat_features([1, 2, 3, 4])
    assert (s.mean, s.median) == (2.5, 2.5)
    assert s.sd == pytest.approx(np.sqrt(1.25), rel=1e-15)
    assert s.skew == 0 and not s.degenerate


def test_stat_symmetric_skew_zero():
    assert stat_features([-2, -1, 1, 2]).skew == 0


def test_stat_matches_scipy():
    x = np.random.default_rng(0).gamma(2.0, size=501)
    s = stat_features(x)
    assert s.median == np.median(x)
    assert s.skew == pytest.approx(stats.skew(x, bias=True), rel=1e-12)
    assert s.kurtosis == pytest.approx(stats.kurtosis(x, fisher=True, bias=True), rel=1e-12)
    assert s.sd == pytest.approx(np.std(x), rel=1e-14)


def test_stat_gaussian_moments():
    x = np.random.default_rng(1).standard_normal(10_000)
    s = stat_features(x)
    assert -0.1 < s.skew < 0.1
    assert -0.2 < s.kurtosis < 0.2


def test_stat_constant_is_degenerate():
    s = stat_features([3.0] * 10)
    assert (s.sd, s.skew, s.kurtosis, s.degenerate) == (0.0, 0.0, 0.0, True)


def test_stat_needs_four():
    with pytest.raises(ValidationError):
        stat_features([1, 2, 3])


def test_hjorth_constant_degenerate():
    assert tuple(hjorth(np.full(50, 2.0))) == (0.0, 0.0, 0.0, True)


def test_hjorth_constant_difference():
    # var(x') = 0 < var(x): mobility is a valid 0, complexity undefined -> 0
    x = np.arange(20.0)
    h = hjorth(x)
    assert h.activity == pytest.approx(np.var(x), rel=1e-14)
    assert h.mobility == 0 and h.complexity == 0 and h.degenerate


def test_hjorth_brute_force():
    x = np.random.default_rng(2).standard_normal(999).cumsum()
    a, m, c = brute_hjorth(x)
    h = hjorth(x)
    assert h.activity == pytest.approx(a, rel=1e-12)
    assert h.mobility == pytest.approx(m, rel=1e-12)
    assert h.complexity == pytest.approx(c, rel=1e-12)


def test_hjorth_iid_noise():
    h = hjorth(np.random.default_rng(3).standard_normal(1_000_000))
    assert h.mobility == pytest.approx(np.sqrt(2), rel=0.01)
    # second difference of iid noise has variance 6, first has 2
    assert h.complexity == pytest.approx(np.sqrt(3) / np.sqrt(2), rel=0.01)


def test_hjorth_alternating():
    h = hjorth(np.arange(100_000) % 2.0)
    assert h.mobility == pytest.approx(2.0, rel=0.01)
    assert h.complexity == pytest.approx(1.0, rel=0.01)


def test_hjorth_needs_three():
    with pytest.raises(ValidationError):
        hjorth([1.0, 2.0])


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=80, deadline=None)
@given(arrays(np.float64, st.integers(8, 200), elements=finite), st.floats(0.01, 100.0), st.floats(-500, 500))
def test_scale_shift_reversal(x, a, b):
    assume(np.std(x) > 1e-3 and np.std(np.diff(x)) > 1e-3 and np.std(np.diff(x, 2)) > 1e-3)
    s0, h0 = stat_features(x), hjorth(x)

    s, h = stat_features(a * x), hjorth(a * x)
    assert h.activity == pytest.approx(a * a * h0.activity, rel=1e-9)
    assert h.mobility == pytest.approx(h0.mobility, rel=1e-9)
    assert h.complexity == pytest.approx(h0.complexity, rel=1e-9)
    assert s.mean == pytest.approx(a * s0.mean, rel=1e-9, abs=1e-9 * a * np.abs(x).max())
    assert s.median == pytest.approx(a * s0.median, rel=1e-9)
    assert s.sd == pytest.approx(a * s0.sd, rel=1e-9)
    assert s.skew == pytest.approx(s0.skew, rel=1e-9, abs=1e-9)
    assert s.kurtosis == pytest.approx(s0.kurtosis, rel=1e-9, abs=1e-9)

    s, h = stat_features(x + b), hjorth(x + b)
    # shifting loses up to |b|/sd bits of the centred values
    tol = 1e-9 * max(1.0, (abs(b) + np.abs(x).max()) / s0.sd)
    assert h.activity == pytest.approx(h0.activity, rel=tol)
    assert h.mobility == pytest.approx(h0.mobility, rel=tol)
    assert h.complexity == pytest.approx(h0.complexity, rel=tol)
    assert s.sd == pytest.approx(s0.sd, rel=tol)
    assert s.skew == pytest.approx(s0.skew, rel=tol, abs=tol)
    assert s.kurtosis == pytest.approx(s0.kurtosis, rel=tol, abs=tol)
    assert s.mean == pytest.approx(s0.mean + b, rel=1e-9, abs=1e-9 * (abs(b) + np.abs(x).max()))
    assert s.median == pytest.approx(s0.median + b, rel=1e-9, abs=1e-9 * (abs(b) + np.abs(x).max()))

    s, h = stat_features(x[::-1]), hjorth(x[::-1])
    for got, want in zip(tuple(s)[:5] + tuple(h)[:3], tuple(s0)[:5] + tuple(h0)[:3]):
        assert got == pytest.approx(want, rel=1e-9, abs=1e-9 * max(1.0, abs(want)))


# ----------------------------------------------------------------- matrix

def _epochs(n, c=31, w=100, seed=0):
    rng = np.random.default_rng(seed)
    spec = WindowSpec(0, 0.2)
    return [Epoch(rng.standard_normal((c, w)), Label(i % 3), spec, 1000 + i) for i in range(n)]


def test_featurize_one_epoch_248(montage):
    fm = featurize(_epochs(1), montage.names)
    assert fm.shape == (1, 248)
    assert fm.names[:8] == [f"Fp1_{f}" for f in FEATURE_NAMES]
    assert fm.names[-1] == "TP10_complexity"
    assert fm.names == feature_names(montage.names)


def test_featurize_matches_scalar_functions(montage):
    ep = _epochs(1)[0]
    fm = featurize([ep], montage.names)
    for ch in (0, 13, 30):
        want = tuple(stat_features(ep.data[ch]))[:5] + tuple(hjorth(ep.data[ch]))[:3]
        np.testing.assert_allclose(fm.values[0, ch * 8:(ch + 1) * 8], want, rtol=1e-12, atol=1e-15)


def test_featurize_empty_rejected():
    with pytest.raises(ValidationError):
        featurize([])


def test_featurize_mixed_shapes_rejected():
    eps = _epochs(2)
    eps.append(Epoch(np.zeros((31, 50)), Label.LEFT, WindowSpec(0, 0.1), 0))
    with pytest.raises(ValidationError, match="mixed"):
        featurize(eps)


def test_featurize_identical_epochs_identical_rows():
    ep = _epochs(1)[0]
    fm = featurize([ep, ep])
    assert np.array_equal(fm.values[0], fm.values[1])


def test_featurize_flat_channel_flagged():
    ep = _epochs(1, c=3)[0]
    ep.data[1] = 5.0
    fm = featurize([ep])
    assert fm.degenerate[0, 1] and not fm.degenerate[0, 0]
    assert np.isfinite(fm.values).all()


def test_feature_csv_round_trip(tmp_path, montage):
    fm = featurize(_epochs(4), montage.names)
    fm.to_csv(tmp_path / "f.csv")
    back = FeatureMatrix.from_csv(tmp_path / "f.csv")
    assert back.names == fm.names
    assert np.array_equal(back.values, fm.values)
    assert np.array_equal(back.labels, fm.labels)
    header = (tmp_path / "f.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 249 and header[-1] == "label"
