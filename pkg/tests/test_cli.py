import json

import numpy as np
import pytest

from photogemm.cli import main
from photogemm.matrix_io import read_matrix, write_matrix


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gemm(tmp_path, capsys):
    g = np.random.default_rng(0)
    write_matrix(tmp_path / "a.csv", g.normal(size=(4, 6)))
    write_matrix(tmp_path / "b.bin", g.normal(size=(6, 3)))
    code, out, _ = run(capsys, "gemm", str(tmp_path / "a.csv"), str(tmp_path / "b.bin"), "--out", str(tmp_path / "c.csv"))
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "photogemm.report/1" and doc["results"]["shape"] == [4, 3]
    assert "wall_clock_s" in doc["meta"]
    assert read_matrix(tmp_path / "c.csv").shape == (4, 3)


def test_gemm_shape_mismatch(tmp_path, capsys):
    write_matrix(tmp_path / "a.csv", np.ones((16, 16)))
    write_matrix(tmp_path / "b.csv", np.ones((5, 3)))
    code, _, err = run(capsys, "gemm", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"))
    assert code == 2
    assert "16x16" in err and "5x3" in err


def test_missing_file_and_bad_config(tmp_path, capsys):
    code, _, err = run(capsys, "gemm", str(tmp_path / "none.csv"), str(tmp_path / "none.csv"))
    assert code == 1 and "error" in err
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("num_ppus = -3\n")
    code, _, err = run(capsys, "area-power", "--config", str(cfg))
    assert code == 2 and "num_ppus" in err


def test_area_power_csv(capsys):
    code, out, _ = run(capsys, "area-power", "--format", "csv")
    assert code == 0
    assert "results.total_area_mm2,1183.86" in out and "results.total_power_w,170.47" in out


def test_perf_and_sweep(capsys):
    code, out, _ = run(capsys, "perf", "-M", "16", "-K", "16", "-N", "16")
    assert code == 0
    assert json.loads(out)["results"]["perf"]["throughput_gflops"] == pytest.approx(209.25, rel=1e-3)
    code, out, _ = run(capsys, "perf", "sweep-ppus", "--counts", "25,50,100,200")
    doc = json.loads(out)
    assert [p["num_ppus"] for p in doc["results"]["points"]] == [25, 50, 100, 200]
    assert 100 <= doc["results"]["crossover_ppus"] <= 120


def test_experiment_to_file_and_seed(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = run(capsys, "experiment", "error-scaling", "--sizes", "8,16,32", "--trials", "1", "--seed", "4", "--out", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["seed"] == 4 and doc["config"]["noise.seed"] == 4
    assert [r["n"] for r in doc["results"]["rows"]] == [8, 16, 32]


def test_config_seed_is_default(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("noise.seed = 9\n")
    code, out, _ = run(capsys, "experiment", "noise-char", "--config", str(cfg), "--widths", "3-4",
                       "--trials", "10", "--dot-lengths", "32", "--dot-trials", "10")
    assert code == 0 and json.loads(out)["seed"] == 9


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["experiment", "nope"])
    assert exc.value.code == 2
