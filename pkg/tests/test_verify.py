import pytest

from cogfuse.numeric import ConfigError
from cogfuse.verify import SABOTAGE_MODES, format_report, run_verify

SMALL = 0.05


@pytest.fixture(scope="module")
def baseline():
    return run_verify(seed=3, scale=SMALL)


def test_clean_run_passes(baseline):
    failed = [r.line() for r in baseline if not r.passed]
    assert not failed
    names = [r.name for r in baseline]
    assert len(names) == len(set(names)) == 15


@pytest.mark.parametrize("mode, victim", [
    ("drop-inv-n", "normalization"),
    ("drop-mean", "linear_vs_reference"),
    ("flip-kl-grad", "loss_gradients"),
])
def test_sabotage_is_caught(mode, victim):
    results = {r.name: r for r in run_verify(seed=3, scale=SMALL, sabotage=mode)}
    assert not results[victim].passed


def test_sabotage_modes_listed():
    assert set(SABOTAGE_MODES) == {"none", "drop-inv-n", "drop-mean", "flip-kl-grad"}
    with pytest.raises(ConfigError):
        run_verify(sabotage="nope", scale=SMALL)


def test_threads_do_not_change_results(baseline):
    threaded = run_verify(seed=3, scale=SMALL, threads=4)
    assert format_report(threaded) == format_report(baseline)


def test_seed_changes_metrics(baseline):
    other = run_verify(seed=4, scale=SMALL)
    assert [r.worst for r in other] != [r.worst for r in baseline]


def test_single_kernel():
    results = run_verify(seed=0, scale=SMALL, kernel="elu1")
    assert all(r.passed for r in results)


def test_report_summary(baseline):
    text = format_report(baseline, "hdr")
    lines = text.splitlines()
    assert lines[0] == "hdr" and lines[-1] == "summary: 15/15 passed"
