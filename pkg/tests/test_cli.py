import json

import numpy as np
import pytest

from headsmith import imgprep
from headsmith.cli import main
from headsmith.data import read_feature_csv


@pytest.fixture
def blobs_csv(tmp_path):
    path = tmp_path / "blobs.csv"
    assert main(["synth", "blobs", "--samples", "120", "--features", "8", "--patients", "20", "--out", str(path)]) == 0
    return path


def test_synth_distinct(tmp_path):
    path = tmp_path / "d.csv"
    assert main(["synth", "distinct", "--features", "40", "--samples", "10", "--out", str(path)]) == 0
    assert read_feature_csv(path).width == 40


def test_avt_fit_and_apply(blobs_csv, tmp_path, capsys):
    sel = tmp_path / "sel.json"
    assert main(["avt-fit", "--features", str(blobs_csv), "--preset", "mid", "--out", str(sel)]) == 0
    assert "kept 4 of 8" in capsys.readouterr().out
    out = tmp_path / "filtered.csv"
    assert main(["avt-apply", "--selector", str(sel), "--features", str(blobs_csv), "--out", str(out)]) == 0
    assert read_feature_csv(out).width == 4


def test_avt_fit_needs_percentile(blobs_csv, tmp_path):
    assert main(["avt-fit", "--features", str(blobs_csv), "--out", str(tmp_path / "s.json")]) == 2


def test_split_nas_evaluate(blobs_csv, tmp_path, capsys):
    parts = tmp_path / "parts"
    assert main(["split", "--features", str(blobs_csv), "--seed", "1", "--out", str(parts)]) == 0
    search = tmp_path / "search"
    argv = ["nas", "--train", str(parts / "train.csv"), "--val", str(parts / "val.csv")]
    assert main(argv + ["--max-trials", "2", "--max-epochs", "2", "--out", str(search)]) == 0
    assert "Total parameters" in (search / "architecture.md").read_text()
    report = tmp_path / "report.json"
    argv = ["evaluate", "--model", str(search / "model.json"), "--features", str(parts / "test.csv")]
    assert main(argv + ["--out", str(report)]) == 0
    assert json.loads(report.read_text())["dimensionality"] == 8
    assert "| Metric | Value |" in capsys.readouterr().out


def test_run(blobs_csv, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"feature_csv": blobs_csv.name, "percentiles": [50], "max_trials": 1, "max_epochs": 1}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "runs")]) == 0
    assert (tmp_path / "runs" / "comparison.md").exists()


def test_run_bad_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"feature_csv": "x.csv", "max_trials": -1}))
    assert main(["run", "--config", str(cfg)]) == 2


def test_missing_data_file(tmp_path):
    assert main(["avt-fit", "--features", str(tmp_path / "none.csv"), "--percentile", "50", "--out", "x"]) == 3


def test_width_mismatch(blobs_csv, tmp_path):
    sel = tmp_path / "sel.json"
    main(["avt-fit", "--features", str(blobs_csv), "--percentile", "50", "--out", str(sel)])
    other = tmp_path / "other.csv"
    main(["synth", "blobs", "--samples", "20", "--features", "3", "--patients", "5", "--out", str(other)])
    assert main(["avt-apply", "--selector", str(sel), "--features", str(other), "--out", str(tmp_path / "o.csv")]) == 3


def test_prep(tmp_path, capsys):
    src = tmp_path / "in"
    src.mkdir()
    imgprep.write_pgm(src / "a.pgm", np.array([[0, 1], [2, 3]], dtype=np.uint8))
    assert main(["prep", "equalize", "--in", str(src), "--out", str(tmp_path / "out")]) == 0
    np.testing.assert_array_equal(imgprep.read_pgm(tmp_path / "out" / "a.pgm"), [[0, 85], [170, 255]])
    assert "1 images" in capsys.readouterr().out


def test_unknown_command():
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2
