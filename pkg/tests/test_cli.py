import json

import numpy as np
import pytest

from fbgtouch import cli, formats

SMALL = """
seed = 3
[geometry]
grid_cols = 2
grid_rows = 2
rotations = 4
[scan]
attempts_per_point = 1
dwell_s = 0.2
gap_s = 0.3
[prep]
w_p = 200
[model]
epochs = 2
feature_dim = 8
[layout]
consistency_seeds = [1, 2]
[grasp]
count = 12
epochs = 2
feature_dim = 8
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def run(*args):
    return cli.main([str(a) for a in args])


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def pipeline(cfg, out):
    for cmd in ("gen-calib", "train", "eval-loc", "grasp-gen", "grasp-train", "grasp-eval"):
        assert run(cmd, "--config", cfg, "--out", out) == 0, cmd
    for which in ("sensitivity", "response", "degradation", "localization", "consistency", "grasp"):
        assert run("bench", which, "--config", cfg, "--out", out) == 0, which


def test_full_pipeline_is_byte_deterministic(cfg_path, tmp_path, capsys):
    pipeline(cfg_path, tmp_path / "a")
    pipeline(cfg_path, tmp_path / "b")
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert a.keys() == b.keys()
    assert [k for k in a if a[k] != b[k]] == []
    out = capsys.readouterr().out
    assert "Accuracy (mm)" in out and "sensitivity at_grating: 0.0280 N" in out


def test_gen_calib_outputs(cfg_path, tmp_path):
    assert run("gen-calib", "--config", cfg_path, "--out", tmp_path) == 0
    events = formats.read_events(tmp_path / "calib" / "events.jsonl")
    stream = formats.read_stream(tmp_path / "calib" / "stream_fiber0.tcap")
    assert len(events) == 2 * 2 * 4
    assert stream.channels == 8
    man = json.loads((tmp_path / "calib" / "manifest.json").read_text())
    assert man["outputs"]["events.jsonl"] == formats.file_digest(tmp_path / "calib" / "events.jsonl")
    assert len(man["config_hash"]) == 64


def test_seed_changes_checksum(cfg_path, tmp_path):
    run("gen-calib", "--config", cfg_path, "--out", tmp_path / "a")
    run("gen-calib", "--config", cfg_path, "--out", tmp_path / "b", "--seed", 4)
    a = formats.file_digest(tmp_path / "a" / "calib" / "stream_fiber0.tcap")
    b = formats.file_digest(tmp_path / "b" / "calib" / "stream_fiber0.tcap")
    assert a != b


def test_default_config_event_count(tmp_path):
    assert run("gen-calib", "--out", tmp_path) == 0
    assert len(formats.read_events(tmp_path / "calib" / "events.jsonl")) == 900


def test_missing_event_file(cfg_path, tmp_path, capsys):
    run("gen-calib", "--config", cfg_path, "--out", tmp_path)
    missing = tmp_path / "calib" / "events.jsonl"
    missing.unlink()
    assert run("train", "--config", cfg_path, "--out", tmp_path) == cli.EXIT_DATA
    assert str(missing) in capsys.readouterr().err


def test_truncated_stream(cfg_path, tmp_path, capsys):
    run("gen-calib", "--config", cfg_path, "--out", tmp_path)
    p = tmp_path / "calib" / "stream_fiber0.tcap"
    p.write_bytes(p.read_bytes()[:-3])
    assert run("train", "--config", cfg_path, "--out", tmp_path) == cli.EXIT_DATA
    assert "truncated" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore:zero-range channels")
def test_nan_loss_exit_code(cfg_path, tmp_path, capsys):
    run("gen-calib", "--config", cfg_path, "--out", tmp_path)
    p = tmp_path / "calib" / "stream_fiber0.tcap"
    s = formats.read_stream(p)
    s.wavelengths_nm[:] = np.nan
    formats.write_stream(p, s)
    with pytest.warns(RuntimeWarning):
        assert run("train", "--config", cfg_path, "--out", tmp_path) == cli.EXIT_NUMERIC
    assert "numeric failure" in capsys.readouterr().err


def test_bench_localization_needs_checkpoint(cfg_path, tmp_path):
    run("gen-calib", "--config", cfg_path, "--out", tmp_path)
    assert run("bench", "localization", "--config", cfg_path, "--out", tmp_path) == cli.EXIT_DATA


def test_usage_and_config_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("bench", "nonsense")
    assert exc.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        run()
    assert exc.value.code == cli.EXIT_USAGE
    bad = tmp_path / "bad.toml"
    bad.write_text("[model]\nepochz = 3\n")
    assert run("train", "--config", bad) == cli.EXIT_USAGE
    assert "epochz" in capsys.readouterr().err


def test_bench_records_are_structured(cfg_path, tmp_path):
    assert run("bench", "response", "--config", cfg_path, "--out", tmp_path) == 0
    rec = formats.read_records(tmp_path / "bench" / "response.jsonl")[0]
    assert rec["rise_time_ms"] == pytest.approx(87, abs=1)
    assert (tmp_path / "bench" / "response.txt").read_text().startswith("response: rise")
