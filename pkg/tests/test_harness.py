import csv
import dataclasses
import math

import numpy as np
import pytest

from csewt.harness import (ALGORITHMS, CSV_FIELDS, RunReport, Sweep, benchmark, emit_report,
                           import_samples, load_report, load_scenario, read_csv_report, run_scenario,
                           scenario_phases)
from csewt.signals import synthesize

from conftest import FS


@pytest.fixture(scope="module")
def small_a(tmp_path_factory):
    out = tmp_path_factory.mktemp("case_a")
    cfg = load_scenario("A", trials=3, seed=11, out_dir=str(out), dump_trials=True, emit_filters=True)
    return cfg, run_scenario(cfg), out


def test_scenarios_load():
    for case in "ABCDEF":
        cfg = load_scenario(case)
        assert cfg.trials == 100 and cfg.fs == 6400.0 and cfg.duration == 0.2
        spec = cfg.spec(*cfg.points()[0], seed=0)
        assert len(spec.components()) == 12
    assert load_scenario("E").sweep.values == (49.5, 49.6, 49.7, 49.8, 49.9, 50.1, 50.2, 50.3, 50.4, 50.5)
    assert load_scenario("F").sweep == Sweep("snr_db", (40.0, 50.0, 60.0, 70.0, 80.0))
    assert scenario_phases("A") == pytest.approx([0.0, math.pi / 3, -math.pi / 3])


def test_scenario_parameters():
    b = load_scenario("B").spec(50.0, math.inf, 0)
    assert (b.modulation.kx, b.modulation.ka, b.modulation.frequency) == (0.1, 0.4, 1.0)
    c = load_scenario("C").spec(50.0, math.inf, 0)
    assert (c.events[0].time, c.events[0].factor) == (0.115, 1.4)
    d = load_scenario("D").spec(50.0, math.inf, 0)
    assert d.events[0].time == 0.13


def test_invalid_configs():
    with pytest.raises(ValueError):
        load_scenario("A", trials=0)
    with pytest.raises(ValueError):
        load_scenario("A", algorithms=("FOO",))
    with pytest.raises(ValueError):
        load_scenario("G")
    with pytest.raises(ValueError):
        load_scenario("A", duration=0.01)


def test_row_count_and_schema(small_a):
    cfg, report, out = small_a
    assert len(report.rows) == 48
    assert {r.algorithm for r in report.rows} == set(ALGORITHMS)
    assert all(r.trials == 3 and r.std_efc >= 0 for r in report.rows)
    with open(out / "case_A.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_FIELDS
    assert len(rows) == 49


def test_csv_round_trip_is_exact(small_a):
    _, report, out = small_a
    assert read_csv_report(out / "case_A.csv") == report.rows


def test_json_round_trip(small_a, tmp_path):
    _, report, out = small_a
    again = load_report(out / "case_A.json")
    assert again == report
    emit_report(again, "json", tmp_path / "r.json")
    assert load_report(tmp_path / "r.json") == report


def test_std_matches_trial_dump(small_a):
    _, report, out = small_a
    per = {}
    with open(out / "case_A_trials.csv") as fh:
        for r in csv.DictReader(fh):
            per.setdefault((r["algorithm"], float(r["component_hz"])), []).append(float(r["efc"]))
    for row in report.rows:
        vals = per[(row.algorithm, row.component_hz)]
        assert row.mean_efc == pytest.approx(np.mean(vals), rel=1e-12)
        assert row.std_efc == pytest.approx(np.std(vals, ddof=1), rel=1e-12)


def test_filter_csv_written(small_a):
    _, _, out = small_a
    assert (out / "case_A_filters_seg0.csv").exists()


def test_empty_algorithm_list(tmp_path):
    cfg = load_scenario("A", trials=1, algorithms=(), out_dir=str(tmp_path))
    report = run_scenario(cfg)
    assert report.rows == []
    assert (tmp_path / "case_A.csv").read_text().strip() == ",".join(CSV_FIELDS)


def test_reproducible():
    cfg = load_scenario("C", trials=2, seed=5, algorithms=("FFT", "CSEWT"))
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert a.rows == b.rows
    assert a.metadata["config_hash"] == b.metadata["config_hash"]


def test_case_e_at_nominal_equals_case_a():
    a = run_scenario(load_scenario("A", trials=3, seed=7, algorithms=("CSEWT", "FFT")))
    e = run_scenario(load_scenario("E", trials=3, seed=7, algorithms=("CSEWT", "FFT"),
                                   sweep=Sweep("f1", (50.0,))))
    assert [dataclasses.replace(r, case="A") for r in e.rows] == a.rows


def test_sweep_expands_points():
    cfg = load_scenario("F", trials=1, algorithms=("FFT",))
    report = run_scenario(cfg)
    assert sorted({r.snr_db for r in report.rows}) == [40, 50, 60, 70, 80]
    assert len(report.rows) == 5 * 12


def test_failures_are_counted(monkeypatch):
    from csewt import analysis

    def boom(*a, **k):
        raise RuntimeError("broken")
    monkeypatch.setattr(analysis, "fft_energy", boom)
    report = run_scenario(load_scenario("A", trials=2, algorithms=("FFT", "CSEWT")))
    assert report.failures == {"FFT": 2, "CSEWT": 0}
    assert report.select("FFT") == []
    assert len(report.select("CSEWT")) == 12


def test_report_helpers():
    report = RunReport()
    assert math.isnan(report.worst("CSEWT"))


def test_emit_errors(tmp_path):
    with pytest.raises(ValueError):
        emit_report(RunReport(), "xml", tmp_path / "r.xml")
    with pytest.raises(OSError, match="missing"):
        emit_report(RunReport(), "csv", tmp_path / "missing" / "r.csv")


def test_benchmark_minimum_trials():
    with pytest.raises(ValueError):
        benchmark(load_scenario("A", trials=9))
    res = benchmark(load_scenario("A", trials=10, algorithms=("FFT", "CSDFT", "CSEWT")))
    assert res.windows == 10
    assert all(s > 0 for s in res.seconds.values())


def _write(path, n, header="t,u,i"):
    t = np.arange(n) / FS
    u = np.sin(2 * np.pi * 50 * t)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for k in range(n):
            fh.write(f"{t[k]:.17g},{u[k]:.17g},{0.5 * u[k]:.17g}\n" if header.startswith("t")
                     else f"{u[k]:.17g},{0.5 * u[k]:.17g}\n")


@pytest.mark.parametrize("n,windows", [(1280, 1), (2560, 2)])
def test_import_whole_windows(tmp_path, n, windows):
    path = tmp_path / "rec.csv"
    _write(path, n)
    got = import_samples(path, FS)
    assert len(got) == windows
    assert all(u.n == 1280 for u, _ in got)


def test_import_drops_partial_window(tmp_path):
    path = tmp_path / "rec.csv"
    _write(path, 1300, header="u,i")
    with pytest.warns(UserWarning, match="20 trailing"):
        got = import_samples(path, FS)
    assert len(got) == 1


def test_import_rejects_bad_files(tmp_path):
    path = tmp_path / "bad.csv"
    _write(path, 100)
    with pytest.raises(ValueError, match="time column"):
        import_samples(path, 3200.0)
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        import_samples(path, FS)
    path.write_text("u,i\n1,2\n1,x\n")
    with pytest.raises(ValueError, match=":3"):
        import_samples(path, FS)
    path.write_text("u,i\n1,2,3\n")
    with pytest.raises(ValueError, match="expected 2"):
        import_samples(path, FS)
