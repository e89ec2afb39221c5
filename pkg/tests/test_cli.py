import csv

import numpy as np

from csewt.cli import main

from conftest import FS


def test_run_writes_tables(tmp_path, capsys):
    code = main(["run", "--case", "A", "--algo", "FFT,CSEWT", "--trials", "2", "--snr", "inf",
                 "--out", str(tmp_path), "--dump-trials"])
    assert code == 0
    with open(tmp_path / "case_A.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 24
    assert {r["snr_db"] for r in rows} == {"inf"}
    assert (tmp_path / "case_A_trials.csv").exists()
    assert "CSEWT" in capsys.readouterr().out


def test_run_phase_in_degrees(tmp_path):
    assert main(["run", "--case", "A", "--algo", "FFT", "--trials", "1", "--phase", "60",
                 "--out", str(tmp_path)]) == 0


def test_bench(capsys):
    assert main(["bench", "--case", "A", "--trials", "10"]) == 0
    out = capsys.readouterr().out
    assert "10 windows" in out


def test_bench_too_few_trials(capsys):
    assert main(["bench", "--case", "A", "--trials", "3"]) == 2
    assert "at least 10" in capsys.readouterr().err


def test_analyze(tmp_path):
    n = np.arange(2560)
    path = tmp_path / "rec.csv"
    with open(path, "w") as fh:
        fh.write("u,i\n")
        for k in n:
            x = np.sin(2 * np.pi * 50 * k / FS)
            fh.write(f"{x:.17g},{x:.17g}\n")
    out = tmp_path / "summary.csv"
    assert main(["analyze", "--input", str(path), "--fs", "6400", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert abs(float(rows[0]["fundamental"]) - 0.1) < 1e-4
    assert abs(float(rows[1]["f1_hz"]) - 50.0) < 0.01


def test_missing_input_is_an_error(tmp_path, capsys):
    assert main(["analyze", "--input", str(tmp_path / "nope.csv"), "--fs", "6400"]) == 2
    assert "nope.csv" in capsys.readouterr().err
