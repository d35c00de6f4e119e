import math

import numpy as np
import pytest

from cogfuse.adcot import load_labels, load_traces
from cogfuse.fixtures import fixture_path, generate
from cogfuse.numeric import InvalidInputError
from cogfuse.pipeline import (
    FuseDemoConfig,
    LossDemoConfig,
    format_fuse_report,
    format_loss_report,
    run_fuse_demo,
    run_loss_demo,
)
from cogfuse.vision import synthetic_image


def load(name):
    return load_traces(fixture_path(name, "traces")), load_labels(fixture_path(name, "labels"))


def test_bundled_fixtures_match_generator():
    for name in ("consistent", "conflicting"):
        traces, labels = generate(name)
        assert fixture_path(name, "traces").read_text() == traces
        assert fixture_path(name, "labels").read_text() == labels


def test_loss_demo_step_zero_values():
    traces, labels = load("consistent")
    hist = run_loss_demo(traces, labels, LossDemoConfig(steps=0))
    assert len(hist) == 1
    # W = 0 gives uniform student predictions over the 8-token vocabulary
    n = len(labels)
    expected_hard = sum(len(y) for y in labels) / n * math.log(8)
    expected_soft = sum(min(len(y), t.length) for y, t in zip(labels, traces)) / n * math.log(8)
    assert hist[0].hard == pytest.approx(expected_hard, rel=1e-12)
    assert hist[0].soft == pytest.approx(expected_soft, rel=1e-12)
    assert hist[0].total == pytest.approx(expected_hard + expected_soft, rel=1e-12)


def test_loss_demo_decreases():
    traces, labels = load("consistent")
    hist = run_loss_demo(traces, labels, LossDemoConfig(steps=100))
    totals = [h.total for h in hist]
    assert all(b <= a + 1e-12 for a, b in zip(totals, totals[1:]))


def test_conflicting_fixture_raises_soft_variance_floor():
    traces, labels = load("conflicting")
    hist = run_loss_demo(traces, labels, LossDemoConfig(steps=300))
    # the teacher disagrees with the labels, so neither term can reach zero
    assert hist[-1].hard > 0.1 and hist[-1].soft > 0.1
    assert hist[-1].var_soft > math.exp(LossDemoConfig().s_floor)


def test_loss_demo_rejects_mismatch():
    traces, labels = load("consistent")
    with pytest.raises(InvalidInputError):
        run_loss_demo(traces[:-1], labels)
    with pytest.raises(InvalidInputError):
        run_loss_demo([], [])


def test_loss_report_format():
    traces, labels = load("consistent")
    hist = run_loss_demo(traces, labels, LossDemoConfig(steps=5))
    lines = format_loss_report(hist, every=2).splitlines()
    assert lines[0] == "step,hard,soft,var_hard,var_soft,total"
    assert [l.split(",")[0] for l in lines[1:]] == ["0", "2", "4", "5"]


def test_fuse_demo_shapes():
    res = run_fuse_demo(synthetic_image(896, 896, 1), FuseDemoConfig(question_len=8, cot_len=16))
    assert res.num_patches == 4 and res.grid == (2, 2)
    # 448 / 14 = 32 patches per side, shuffled by 2 -> 16 x 16 = 256 tokens per image
    assert res.visual_tokens == 5 * 256
    assert len(res.prompt) == 24
    assert len(res.fused) == 48 and res.fused.boundary == 24
    assert res.fused.tokens.shape[1] == 64


def test_fuse_demo_text_passthrough_and_report():
    cfg = FuseDemoConfig(tile=224, thumb=224, question_len=1, cot_len=0, seed=5)
    res = run_fuse_demo(synthetic_image(300, 500, 5), cfg)
    assert len(res.prompt) == 1 and len(res.fused) == 2
    text = format_fuse_report(res)
    assert "prompt_len: 1" in text and "fused_length: 2" in text


def test_fuse_demo_image_query():
    cfg = FuseDemoConfig(tile=224, thumb=224, question_len=3, cot_len=2, query_source="image")
    res = run_fuse_demo(synthetic_image(224, 224, 0), cfg)
    assert res.fused.boundary == res.visual_tokens
    assert len(res.fused) == res.visual_tokens + 5


def test_fuse_demo_input_validation():
    with pytest.raises(InvalidInputError):
        run_fuse_demo(synthetic_image(64, 64, 0), FuseDemoConfig(question_len=0))
    with pytest.raises(InvalidInputError):
        run_fuse_demo(synthetic_image(64, 64, 0), FuseDemoConfig(cot_len=-1))


def test_fuse_demo_deterministic():
    img = synthetic_image(448, 448, 2)
    a = format_fuse_report(run_fuse_demo(img, FuseDemoConfig(seed=2)))
    b = format_fuse_report(run_fuse_demo(img.copy(), FuseDemoConfig(seed=2)))
    assert a == b
    c = format_fuse_report(run_fuse_demo(img, FuseDemoConfig(seed=3)))
    assert a != c
