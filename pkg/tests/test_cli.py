import json
from pathlib import Path

import pytest

from plumedist.cli import main

SMALL = Path(__file__).resolve().parents[1] / "configs" / "small.yaml"


def run(tmp_path, *args):
    out = tmp_path / "out"
    rc = main([*args, "--config", str(SMALL), "--out", str(out)])
    return rc, out


def test_simulate_then_calibrate_sample_features_train_evaluate(tmp_path):
    rc, out = run(tmp_path, "simulate", "--steps", "160")
    assert rc == 0 and (out / "trajectories.plum").exists()
    plum = out / "trajectories.plum"
    assert main(["calibrate", "--config", str(SMALL), "--trajectories", str(plum), "--out", str(tmp_path / "c")]) == 0
    cal = json.loads((tmp_path / "c" / "report.json").read_text())
    assert cal["v"] > 0
    assert main(["sample", "--config", str(SMALL), "--trajectories", str(plum), "--out", str(tmp_path / "s")]) == 0
    windows = tmp_path / "s" / "windows.csv"
    assert main(["features", "--config", str(SMALL), "--windows", str(windows), "--out", str(tmp_path / "f")]) == 0
    feats = tmp_path / "f" / "features.csv"
    assert main(["train", "--config", str(SMALL), "--features", str(feats), "--out", str(tmp_path / "t")]) == 0
    model = tmp_path / "t" / "model.json"
    assert main(["evaluate", "--config", str(SMALL), "--features", str(feats), "--model", str(model),
                 "--out", str(tmp_path / "e")]) == 0
    rep = json.loads((tmp_path / "e" / "report.json").read_text())
    assert rep["experiments"][0]["chi"] >= 0
    # sampling from the file and from an in-process simulation agree
    assert main(["sample", "--config", str(SMALL), "--out", str(tmp_path / "s2")]) == 0
    assert (tmp_path / "s2" / "windows.csv").read_bytes() == windows.read_bytes()


@pytest.mark.parametrize("cmd,files", [("evaluate", ["report.json", "scatter.csv"]),
                                       ("sweep", ["report.json", "sweep.csv"]),
                                       ("study", ["report.json", "chi_grid.csv"])])
def test_outputs_exist(tmp_path, cmd, files):
    rc, out = run(tmp_path, cmd)
    assert rc == 0
    for f in files:
        assert (out / f).stat().st_size > 0


def test_failure_is_one_json_line(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("t0_min: 10\nt0_max: 1\n")
    rc = main(["evaluate", "--config", str(bad), "--out", str(tmp_path / "x")])
    err = capsys.readouterr().err.strip().splitlines()
    assert rc != 0 and len(err) == 1
    assert json.loads(err[0])["error"] == "ConfigError"


def test_seed_flag_overrides(tmp_path):
    assert main(["sample", "--config", str(SMALL), "--seed", "5", "--out", str(tmp_path / "a")]) == 0
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert rep["config"]["seed"] == 5
