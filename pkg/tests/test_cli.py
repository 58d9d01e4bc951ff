import json
from pathlib import Path

import numpy as np
import pytest

from octshed import cli, imgcore
from octshed.octsim import synth_phantom


def _records(out):
    return [json.loads(line) for line in out.strip().splitlines()]


@pytest.fixture
def small_scan(tmp_path):
    ph = synth_phantom(96, 96, 3, speckle_sigma=0.2, seed=4)
    imgcore.write_gray_pgm(ph.image, tmp_path / "b.pgm")
    imgcore.write_label_pgm(ph.truth, tmp_path / "t.pgm")
    return tmp_path


def test_parse_defaults():
    args = cli.parse_args(["synth", "-o", "x"])
    assert args.sacs == 12 and args.size == (512, 512)
    cfg = cli.config_from_args(cli.parse_args(["segment", "-i", __file__, "-o", "out/"]))
    assert cfg.threshold == 245 and cfg.conn == "four" and cfg.flood_on == "gradient"


def test_parse_synth():
    args = cli.parse_args(["synth", "--sacs", "12", "--seed", "42", "--size", "512x512", "-o", "ph/"])
    assert (args.command, args.sacs, args.seed, args.size, args.outdir) == ("synth", 12, 42, (512, 512), Path("ph/"))


@pytest.mark.parametrize("argv,flag", [
    (["segment", "--threshold", "300", "-i", __file__, "-o", "o"], "--threshold"),
    (["segment", "-i", "missing.pgm", "-o", "o"], "--input"),
    (["segment", "-i", __file__, "-o", "o", "--bogus"], "--bogus"),
    (["synth", "-o", "o", "--size", "12by4"], "--size"),
    (["ascan", "-o", "o", "--window", "kaiser"], "--window"),
])
def test_usage_errors(argv, flag, capsys):
    assert cli.main(argv) == 1
    assert flag in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
    assert "segment" in capsys.readouterr().out


def test_processing_error_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P9\n1 1\n255\n\x00")
    assert cli.main(["segment", "-i", str(bad), "-o", str(tmp_path / "o")]) == 2
    assert capsys.readouterr().err


def test_ascan_peak(tmp_path, capsys):
    assert cli.main(["ascan", "-o", str(tmp_path), "--n", "1024", "--reflector", "10:1"]) == 0
    rows = (tmp_path / "profile.csv").read_text().splitlines()
    assert rows[0] == "bin,magnitude" and len(rows) == 513
    mags = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert np.argmax(mags) == 10
    assert _records(capsys.readouterr().out)[0]["peak_bin"] == 10


def test_segment_outputs(small_scan, capsys):
    out = small_scan / "seg"
    code = cli.main(["segment", "-i", str(small_scan / "b.pgm"), "-o", str(out),
                     "--truth", str(small_scan / "t.pgm"), "--dump-intermediates"])
    assert code == 0
    for name in ("labels.pgm", "labels.png", "stats.csv", "binary.png", "gradient.png", "lines.png"):
        assert (out / name).is_file()
    rec = _records(capsys.readouterr().out)[0]
    assert rec["run"] == "modified" and {"elapsed_ms", "overseg_ratio", "boundary_f1"} <= set(rec)
    labels = imgcore.read_label_pgm(out / "labels.pgm")
    assert labels.max() == rec["n_regions"]
    assert (out / "stats.csv").read_text().splitlines()[0] == "label,area_px,cx,cy,x0,y0,x1,y1"


def test_baseline_and_compare(small_scan, capsys):
    assert cli.main(["baseline", "-i", str(small_scan / "b.pgm"), "-o", str(small_scan / "b")]) == 0
    base = _records(capsys.readouterr().out)[0]
    assert base["run"] == "baseline" and (small_scan / "b" / "labels.pgm").is_file()
    assert cli.main(["compare", "-i", str(small_scan / "b.pgm"), "-o", str(small_scan / "c")]) == 0
    mod, base2, ratio = _records(capsys.readouterr().out)
    assert (mod["run"], base2["run"]) == ("modified", "baseline")
    assert base2["n_regions"] == base["n_regions"] and mod["n_regions"] <= base2["n_regions"]
    assert "timing_ratio" in ratio


def test_volume_parallel_equals_sequential(tmp_path, capsys):
    vol = tmp_path / "vol"
    vol.mkdir()
    for seed in range(3):
        ph = synth_phantom(72, 64, 2, speckle_sigma=0.15, seed=seed)
        imgcore.write_gray_pgm(ph.image, vol / f"slice{seed}.pgm")
    assert cli.main(["segment", "--volume", str(vol), "-o", str(tmp_path / "seq")]) == 0
    seq = _records(capsys.readouterr().out)
    assert cli.main(["segment", "--volume", str(vol), "-o", str(tmp_path / "par"), "--jobs", "2"]) == 0
    par = _records(capsys.readouterr().out)
    assert [r["slice"] for r in seq] == ["slice0", "slice1", "slice2"]
    for a, b in zip(seq, par):
        assert {k: v for k, v in a.items() if k != "elapsed_ms"} == {k: v for k, v in b.items() if k != "elapsed_ms"}
    for seed in range(3):
        for name in ("labels.pgm", "labels.png", "stats.csv"):
            assert (tmp_path / "seq" / f"slice{seed}" / name).read_bytes() == \
                (tmp_path / "par" / f"slice{seed}" / name).read_bytes()


def test_input_and_volume_exclusive(small_scan):
    assert cli.main(["segment", "-o", "o"]) == 1
    assert cli.main(["segment", "-i", str(small_scan / "b.pgm"), "--volume", str(small_scan), "-o", "o"]) == 1
