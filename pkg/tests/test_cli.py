import json
import subprocess
import sys

import pytest

from cogfuse import bench
from cogfuse.cli import main


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "cogfuse", *args], capture_output=True, text=True)


def test_verify_heads_not_dividing_dim(capsys):
    assert main(["verify", "--dim", "64", "--heads", "3", "--scale", "0.01"]) == 2
    assert "not divisible" in capsys.readouterr().err


def test_verify_sabotage_exit_code(tmp_path):
    out = tmp_path / "r.txt"
    assert main(["verify", "--sabotage", "drop-inv-n", "--scale", "0.02", "--out", str(out)]) == 1
    assert "FAIL" in out.read_text()


def test_verify_clean(tmp_path):
    out = tmp_path / "r.txt"
    assert main(["verify", "--scale", "0.02", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[-1] == "summary: 15/15 passed"


def test_fuse_demo_default_sizes(capsys):
    assert main(["fuse-demo", "--synthetic", "0"]) == 0
    out = capsys.readouterr().out
    assert "patches: 4 (grid 2x2) + 1 global" in out
    assert "fused_length: 48" in out and "boundary: 24" in out


def test_fuse_demo_minimal_prompt(capsys):
    assert main(["fuse-demo", "--synthetic", "1", "--size", "200x300", "--tile", "224",
                 "--thumb", "224", "--question-len", "1", "--cot-len", "0"]) == 0
    out = capsys.readouterr().out
    assert "prompt_len: 1" in out and "fused_length: 2" in out


def test_fuse_demo_from_file(tmp_path, capsys):
    from cogfuse.vision import synthetic_image, write_pnm
    path = tmp_path / "img.ppm"
    write_pnm(path, synthetic_image(100, 120, 4))
    assert main(["fuse-demo", "--image", str(path), "--tile", "112", "--thumb", "112"]) == 0
    assert "patches: 2 (grid 1x2)" in capsys.readouterr().out


def test_fuse_demo_bad_image(tmp_path, capsys):
    path = tmp_path / "bad.ppm"
    path.write_bytes(b"P6\n2 x\n255\n")
    assert main(["fuse-demo", "--image", str(path)]) == 1
    assert "offset" in capsys.readouterr().err


def test_loss_demo_zero_steps(capsys):
    assert main(["loss-demo", "--steps", "0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and lines[1].startswith("0,")


def test_loss_demo_parse_error_line_number(tmp_path, capsys):
    traces = tmp_path / "t.jsonl"
    labels = tmp_path / "y.jsonl"
    traces.write_text('{"dists":[[[0,1.0]]],"vocab":2}\n{"dists":[[[0,0.9]]],"vocab":2}\n')
    labels.write_text('{"ids":[0],"vocab":2}\n{"ids":[1],"vocab":2}\n')
    assert main(["loss-demo", "--traces", str(traces), "--labels", str(labels)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert main(["loss-demo", "--traces", str(traces), "--labels", str(labels),
                 "--renormalize", "--steps", "3"]) == 0


def test_bench_outputs(tmp_path):
    csv_path = tmp_path / "b.csv"
    assert main(["bench", "--seq-lens", "16,32", "--dim", "8", "--heads", "2", "--repeats", "3",
                 "--out", str(csv_path)]) == 0
    recs, slopes = bench.read_csv(csv_path.read_text())
    assert len(recs) == 6 and len(slopes) == 3
    json_path = tmp_path / "b.json"
    assert main(["bench", "--seq-lens", "16,32", "--dim", "8", "--heads", "2", "--repeats", "3",
                 "--methods", "linear", "--format", "json", "--out", str(json_path)]) == 0
    doc = json.loads(json_path.read_text())
    assert [r["n_keys"] for r in doc["records"]] == [16, 32]


def test_bench_config_error():
    assert main(["bench", "--seq-lens", "32,16"]) == 2


def test_module_entry_point():
    proc = run_cli("--help")
    assert proc.returncode == 0
    for cmd in ("verify", "bench", "loss-demo", "fuse-demo"):
        assert cmd in proc.stdout


def test_bad_arguments_exit_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--kernel", "tanh"])
    assert exc.value.code == 2
