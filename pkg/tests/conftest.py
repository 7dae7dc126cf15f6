import numpy as np
import pytest

from turnintent.ingest import Recording, SynthSpec, load_montage, synthesize
from turnintent.preprocess import preprocess

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def measured(request):
    """Dict for numbers an acceptance test wants shown in the summary."""
    box = {}
    request.node._measured = box
    return box


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    detail = ", ".join(f"{k}={v}" for k, v in getattr(item, "_measured", {}).items())
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "details": []})
    entry["ok"] &= rep.passed
    if detail:
        entry["details"].append(detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        line = f"criterion {number}: {'PASS' if e['ok'] else 'FAIL'}  {e['title']}"
        if e["details"]:
            line += "  [" + "; ".join(e["details"]) + "]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def montage():
    return load_montage()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_recording(data, fs=500.0, montage=None, names=None):
    montage = montage or load_montage()
    data = np.atleast_2d(np.asarray(data, dtype=float))
    names = names or montage.names[: data.shape[0]]
    return Recording(data, fs, tuple(names), montage.lookup(names))


@pytest.fixture(scope="session")
def small_dataset():
    """10 trials per class, preprocessed; cheap enough for sweep tests."""
    rec, markers = synthesize(SynthSpec(n_trials_per_class=10, seed=3))
    clean, _ = preprocess(rec)
    return clean, markers
