"""Scenario runner: repeated trials, error statistics, timing and report files."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import analysis as an
from .signals import SampledWindow, SignalSpec, reference_energy, synthesize

log = logging.getLogger(__name__)

ALGORITHMS = ("FFT", "EWT", "CSDFT", "CSEWT")
CASES = ("A", "B", "C", "D", "E", "F")
# seed offset between sweep points, so trial t of point s uses seed + s * stride + t
SWEEP_STRIDE = 100_000
CSV_FIELDS = ("case", "algorithm", "component_hz", "mean_efc", "std_efc", "trials", "snr_db", "f1_hz")
MIN_BENCH_TRIALS = 10


@dataclass(frozen=True)
class Sweep:
    param: str  # "f1" or "snr_db"
    values: tuple[float, ...]

    def __post_init__(self):
        if self.param not in ("f1", "snr_db"):
            raise ValueError(f"cannot sweep {self.param!r}; use 'f1' or 'snr_db'")
        if not self.values:
            raise ValueError("sweep needs at least one value")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one scenario run.

    ``signal`` is a tree accepted by :meth:`SignalSpec.from_dict`.  The
    current copies the voltage tones lagging by ``phase`` radians unless
    the tree lists its own.  ``snr_db`` applies when no SNR sweep is set.
    """

    case: str
    signal: dict
    fs: float = 6400.0
    duration: float = 0.2
    algorithms: tuple[str, ...] = ALGORITHMS
    trials: int = 100
    snr_db: float = 60.0
    phase: float = 0.0
    sweep: Sweep | None = None
    seed: int = 0
    out_dir: str | None = None
    dump_trials: bool = False
    emit_filters: bool = False
    pipeline: an.PipelineConfig = field(default_factory=an.PipelineConfig)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}; choose from {ALGORITHMS}")
        f1s = [float(self.signal.get("f1", 50.0))]
        if self.sweep is not None and self.sweep.param == "f1":
            f1s = list(self.sweep.values)
        if self.duration * min(f1s) < 1:
            raise ValueError("the window must hold at least one fundamental cycle")

    def points(self) -> list[tuple[float, float]]:
        """``(f1, snr_db)`` of every sweep point, in order."""
        f1 = float(self.signal.get("f1", 50.0))
        if self.sweep is None:
            return [(f1, self.snr_db)]
        if self.sweep.param == "f1":
            return [(float(v), self.snr_db) for v in self.sweep.values]
        return [(f1, float(v)) for v in self.sweep.values]

    def spec(self, f1: float, snr_db: float, seed: int) -> SignalSpec:
        tree = dict(self.signal, f1=f1, snr_db=snr_db, rng_seed=seed)
        return SignalSpec.from_dict(tree, phase_shift=self.phase)

    def digest(self) -> str:
        """Hash of the fields that determine the results."""
        d = asdict(self)
        for k in ("out_dir", "dump_trials", "emit_filters"):
            d.pop(k)
        text = json.dumps(d, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ReportRow:
    case: str
    algorithm: str
    component_hz: float
    mean_efc: float
    std_efc: float
    trials: int
    snr_db: float
    f1_hz: float


@dataclass
class RunReport:
    rows: list[ReportRow] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)  # mean seconds per window
    failures: dict[str, int] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def select(self, algorithm: str | None = None, f1: float | None = None,
               snr_db: float | None = None) -> list[ReportRow]:
        return [r for r in self.rows
                if (algorithm is None or r.algorithm == algorithm)
                and (f1 is None or r.f1_hz == f1)
                and (snr_db is None or r.snr_db == snr_db)]

    def errors(self, algorithm: str, **point) -> dict[float, float]:
        """Mean E_fc per component frequency for one algorithm (and sweep point)."""
        return {r.component_hz: r.mean_efc for r in self.select(algorithm, **point)}

    def worst(self, algorithm: str, **point) -> float:
        vals = [v for v in self.errors(algorithm, **point).values() if not math.isnan(v)]
        return max(vals) if vals else math.nan


# -- scenario fixtures -----------------------------------------------------

def scenario_path(case: str):
    return resources.files("csewt").joinpath("scenarios", f"case_{case.upper()}.json")


def load_scenario(case: str, **overrides) -> ScenarioConfig:
    """Packaged scenario ``case`` (A to F) with any config fields replaced."""
    case = case.upper()
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}; choose from {CASES}")
    data = json.loads(scenario_path(case).read_text())
    return config_from_dict(data, **overrides)


def config_from_dict(data: dict, **overrides) -> ScenarioConfig:
    sweep = data.get("sweep")
    phases = data.get("phase_shifts_deg", [0.0])
    kw = dict(case=data["case"], signal=data["signal"], fs=float(data.get("fs", 6400.0)),
              duration=float(data.get("duration", 0.2)), trials=int(data.get("trials", 100)),
              snr_db=_snr(data.get("snr_db", 60.0)), phase=math.radians(phases[0]),
              sweep=None if sweep is None else Sweep(sweep["param"], tuple(_snr(v) for v in sweep["values"])))
    kw.update(overrides)
    return ScenarioConfig(**kw)


def scenario_phases(case: str) -> list[float]:
    """Phase settings (radians) the scenario file lists."""
    data = json.loads(scenario_path(case.upper()).read_text())
    return [math.radians(p) for p in data.get("phase_shifts_deg", [0.0])]


def _snr(v) -> float:
    if isinstance(v, str):
        return math.inf if v.lower() in ("inf", "infinity") else float(v)
    return float(v)


# -- running ---------------------------------------------------------------

def algorithm_table(cfg: an.PipelineConfig) -> dict[str, Callable]:
    """Name -> ``f(u, i, components) -> {label: energy}``."""
    return {
        "FFT": lambda u, i, c: an.fft_energy(u, i, c),
        "EWT": lambda u, i, c: an.baseline_ewt_energy(u, i, c, cfg).components,
        "CSDFT": lambda u, i, c: an.csdft_energy(u, i, c, cfg.p),
        "CSEWT": lambda u, i, c: an.csewt_energy(u, i, c, cfg).components,
    }


@dataclass
class _Trials:
    errors: dict = field(default_factory=dict)  # (algo, point, label) -> list
    seconds: dict = field(default_factory=dict)  # algo -> list
    failures: dict = field(default_factory=dict)
    dumps: list = field(default_factory=list)


def _run_trials(config: ScenarioConfig, time_only: bool = False) -> _Trials:
    table = algorithm_table(config.pipeline)
    out = _Trials(seconds={a: [] for a in config.algorithms},
                  failures={a: 0 for a in config.algorithms})
    for s, (f1, snr) in enumerate(config.points()):
        for t in range(config.trials):
            seed = config.seed + s * SWEEP_STRIDE + t
            spec = config.spec(f1, snr, seed)
            u, i = synthesize(spec, config.fs, config.duration)
            comps = spec.components()
            refs = {} if time_only else {c.label: reference_energy(spec, config.duration, c, config.fs)
                                         for c in comps}
            for algo in config.algorithms:
                t0 = time.perf_counter()
                try:
                    measured = table[algo](u, i, comps)
                except Exception as exc:  # recorded and excluded from the statistics
                    out.failures[algo] += 1
                    log.warning("case %s %s trial %d failed: %s", config.case, algo, t, exc)
                    continue
                out.seconds[algo].append(time.perf_counter() - t0)
                if time_only:
                    continue
                for c in comps:
                    e = an.relative_error(measured[c.label], refs[c.label])
                    out.errors.setdefault((algo, s, c.label, c.frequency), []).append(e)
                    if config.dump_trials:
                        out.dumps.append((config.case, algo, c.frequency, t, seed, e, snr, f1))
    return out


def _stats(values: Sequence[float]) -> tuple[float, float, int]:
    v = np.array([x for x in values if not math.isnan(x)])
    if len(v) == 0:
        return math.nan, math.nan, 0
    std = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
    return float(np.mean(v)), std, len(v)


def run_scenario(config: ScenarioConfig) -> RunReport:
    """Run every trial of every sweep point and aggregate E_fc per algorithm and component."""
    res = _run_trials(config)
    points = config.points()
    rows = []
    for (algo, s, _label, freq), vals in res.errors.items():
        mean, std, n = _stats(vals)
        f1, snr = points[s]
        rows.append(ReportRow(config.case, algo, float(freq), mean, std, n, float(snr), float(f1)))
    order = {a: k for k, a in enumerate(ALGORITHMS)}
    rows.sort(key=lambda r: (r.f1_hz, r.snr_db, order[r.algorithm], r.component_hz))
    report = RunReport(
        rows=rows,
        timing={a: float(np.mean(v)) if v else math.nan for a, v in res.seconds.items()},
        failures=dict(res.failures),
        metadata={"case": config.case, "config_hash": config.digest(), "seed": config.seed,
                  "trials": config.trials, "phase_rad": config.phase,
                  "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")})
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"case_{config.case}"
        emit_report(report, "csv", out / f"{stem}.csv")
        emit_report(report, "json", out / f"{stem}.json")
        if config.dump_trials:
            _write_dumps(res.dumps, out / f"{stem}_trials.csv")
        if config.emit_filters:
            emit_filters(config, out)
    return report


def _write_dumps(dumps, path: Path) -> None:
    with _open_for_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(["case", "algorithm", "component_hz", "trial", "seed", "efc", "snr_db", "f1_hz"])
        for case, algo, freq, t, seed, e, snr, f1 in dumps:
            w.writerow([case, algo, _fmt(freq), t, seed, _fmt(e), _fmt(snr), _fmt(f1)])


def emit_filters(config: ScenarioConfig, out_dir) -> list[Path]:
    """Write the CSEWT filter bank of every segment of the first trial window."""
    f1, snr = config.points()[0]
    spec = config.spec(f1, snr, config.seed)
    u, i = synthesize(spec, config.fs, config.duration)
    plan = an.segment_window(u, i, config.pipeline)
    paths = []
    for k, seg in enumerate(plan.segments):
        _, bank = an.segment_bank(u.slice(seg.start, seg.stop), seg.f1, config.pipeline.p,
                                  config.pipeline.gamma)
        path = Path(out_dir) / f"case_{config.case}_filters_seg{k}.csv"
        try:
            bank.to_csv(path)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        paths.append(path)
    return paths


# -- report files ----------------------------------------------------------

def _fmt(x: float) -> str:
    return "%.17g" % x


def _open_for_write(path):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_report(report: RunReport, fmt: str, path) -> Path:
    """Write ``report`` as CSV (one row per algorithm and component) or JSON."""
    path = Path(path)
    if fmt == "csv":
        with _open_for_write(path) as fh:
            w = csv.writer(fh)
            w.writerow(CSV_FIELDS)
            for r in report.rows:
                w.writerow([r.case, r.algorithm, _fmt(r.component_hz), _fmt(r.mean_efc),
                            _fmt(r.std_efc), r.trials, _fmt(r.snr_db), _fmt(r.f1_hz)])
    elif fmt == "json":
        data = {"rows": [asdict(r) for r in report.rows], "timing": report.timing,
                "failures": report.failures, "metadata": report.metadata}
        with _open_for_write(path) as fh:
            json.dump(data, fh, indent=1)
    else:
        raise ValueError(f"unknown format {fmt!r}; use 'csv' or 'json'")
    return path


def load_report(path) -> RunReport:
    """Read a report written by :func:`emit_report` in JSON form."""
    data = json.loads(Path(path).read_text())
    rows = [ReportRow(**r) for r in data["rows"]]
    return RunReport(rows, data.get("timing", {}), data.get("failures", {}), data.get("metadata", {}))


def read_csv_report(path) -> list[ReportRow]:
    with open(path, newline="") as fh:
        return [ReportRow(r["case"], r["algorithm"], float(r["component_hz"]), float(r["mean_efc"]),
                          float(r["std_efc"]), int(r["trials"]), float(r["snr_db"]), float(r["f1_hz"]))
                for r in csv.DictReader(fh)]


# -- timing ----------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkResult:
    seconds: dict[str, float]  # mean wall clock per window
    windows: int

    @property
    def ordering_ok(self) -> bool:
        """Whether CSEWT beat CSDFT (the only timing claim checked)."""
        return self.seconds.get("CSEWT", math.inf) < self.seconds.get("CSDFT", -math.inf)


def benchmark(config: ScenarioConfig) -> BenchmarkResult:
    """Mean per-window analysis time of every algorithm (synthesis excluded)."""
    if config.trials < MIN_BENCH_TRIALS:
        raise ValueError(f"benchmark needs at least {MIN_BENCH_TRIALS} trials")
    res = _run_trials(config, time_only=True)
    return BenchmarkResult({a: float(np.mean(v)) if v else math.nan for a, v in res.seconds.items()},
                           config.trials * len(config.points()))


# -- measured data ---------------------------------------------------------

def import_samples(path, fs: float, duration: float = 0.2) -> list[tuple[SampledWindow, SampledWindow]]:
    """Cut a two-channel CSV recording into analysis windows.

    The header is ``t,u,i`` or ``u,i``.  A time column must advance by
    ``1/fs``.  Samples that do not fill a last window are dropped with a
    warning.
    """
    per = int(round(fs * duration))
    if per < 1:
        raise ValueError("window holds no samples")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader, [])]
        if header not in (["t", "u", "i"], ["u", "i"]):
            raise ValueError(f"{path}: header must be 't,u,i' or 'u,i', got {header}")
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    if header[0] == "t" and len(data) > 1:
        steps = np.diff(data[:, 0])
        if not np.allclose(steps, 1.0 / fs, rtol=1e-6, atol=1e-12):
            raise ValueError(f"{path}: time column does not match fs={fs}")
        data = data[:, 1:]
    elif header[0] == "t":
        data = data[:, 1:]
    whole = len(data) // per
    extra = len(data) - whole * per
    if extra:
        warnings.warn(f"{path}: dropping {extra} trailing samples that do not fill a window")
    return [(SampledWindow(fs, data[k * per:(k + 1) * per, 0].copy(), k * duration),
             SampledWindow(fs, data[k * per:(k + 1) * per, 1].copy(), k * duration))
            for k in range(whole)]


@dataclass(frozen=True)
class WindowSummary:
    index: int
    f1: float
    segments: int
    fundamental: float
    harmonics: dict
    interharmonic_total: float


def analyze_windows(windows, cfg: an.PipelineConfig = an.PipelineConfig()) -> list[WindowSummary]:
    """CSEWT band energies of measured windows (no reference needed)."""
    out = []
    for k, (u, i) in enumerate(windows):
        seg_plan = an.segment_window(u, i, cfg)
        rep = an.csewt_energy(u, i, (), cfg)
        f1 = sum(s.f1 * s.length for s in seg_plan.segments) / u.n
        out.append(WindowSummary(k, f1, len(seg_plan.segments), rep.fundamental,
                                 dict(rep.harmonics), rep.interharmonic_total))
    return out
