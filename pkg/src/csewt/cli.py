"""Command line: ``run``, ``bench`` and ``analyze``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

from .harness import (ALGORITHMS, MIN_BENCH_TRIALS, analyze_windows, benchmark, import_samples,
                      load_scenario)


def _snr(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or 'inf': {text!r}") from None


def _algos(text: str) -> tuple[str, ...]:
    names = tuple(a.strip().upper() for a in text.split(",") if a.strip())
    bad = [a for a in names if a not in ALGORITHMS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown algorithm(s) {bad}; choose from {','.join(ALGORITHMS)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csewt", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write CSV/JSON error tables")
    run.add_argument("--case", required=True, type=str.upper, choices="ABCDEF")
    run.add_argument("--algo", type=_algos, default=ALGORITHMS,
                     help="comma separated subset of FFT,EWT,CSDFT,CSEWT (default: all)")
    run.add_argument("--trials", type=int, default=None, help="trials per sweep point (default: scenario file)")
    run.add_argument("--snr", type=_snr, default=None, help="SNR in dB or 'inf' (ignored by SNR sweeps)")
    run.add_argument("--seed", type=int, default=0, help="seed base")
    run.add_argument("--phase", type=float, default=None, help="voltage-current phase shift in degrees")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--dump-trials", action="store_true", help="also write per-trial E_fc")
    run.add_argument("--emit-filters", action="store_true", help="also write the CSEWT filter gains")

    bench = sub.add_parser("bench", help="mean per-window time of each algorithm")
    bench.add_argument("--case", required=True, type=str.upper, choices="ABCDEF")
    bench.add_argument("--trials", type=int, default=MIN_BENCH_TRIALS)
    bench.add_argument("--seed", type=int, default=0)

    ana = sub.add_parser("analyze", help="CSEWT band energies of a recorded CSV")
    ana.add_argument("--input", required=True)
    ana.add_argument("--fs", required=True, type=float)
    ana.add_argument("--duration", type=float, default=0.2)
    ana.add_argument("--out", default=None, help="write the summary as CSV here")
    return p


def _run(args) -> int:
    overrides = {"algorithms": args.algo, "seed": args.seed, "out_dir": args.out,
                 "dump_trials": args.dump_trials, "emit_filters": args.emit_filters}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.snr is not None:
        overrides["snr_db"] = args.snr
    if args.phase is not None:
        overrides["phase"] = math.radians(args.phase)
    from .harness import run_scenario
    report = run_scenario(load_scenario(args.case, **overrides))
    points = sorted({(r.f1_hz, r.snr_db) for r in report.rows})
    for f1, snr in points:
        print(f"case {args.case}  f1={f1:g} Hz  snr={snr:g} dB")
        for algo in args.algo:
            errs = report.errors(algo, f1=f1, snr_db=snr)
            if errs:
                worst = max(errs, key=lambda k: errs[k])
                print(f"  {algo:6s} max mean E_fc {100 * errs[worst]:8.3f}% at {worst:g} Hz")
    for algo, sec in report.timing.items():
        fails = report.failures.get(algo, 0)
        print(f"  {algo:6s} {1000 * sec:8.2f} ms/window" + (f"  ({fails} failed)" if fails else ""))
    print(f"wrote {Path(args.out) / f'case_{args.case}.csv'}")
    return 0


def _bench(args) -> int:
    res = benchmark(load_scenario(args.case, trials=args.trials, seed=args.seed))
    for algo, sec in sorted(res.seconds.items(), key=lambda kv: kv[1]):
        print(f"{algo:6s} {1000 * sec:9.3f} ms/window")
    print(f"{res.windows} windows; CSEWT faster than CSDFT: {'yes' if res.ordering_ok else 'no'}")
    return 0


def _analyze(args) -> int:
    windows = import_samples(args.input, args.fs, args.duration)
    rows = analyze_windows(windows)
    orders = sorted({h for r in rows for h in r.harmonics})
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        out = csv.writer(fh)
        out.writerow(["window", "f1_hz", "segments", "fundamental", "interharmonic_total"]
                     + [f"h{h}" for h in orders])
        for r in rows:
            out.writerow([r.index, "%.9g" % r.f1, r.segments, "%.12g" % r.fundamental,
                          "%.12g" % r.interharmonic_total]
                         + ["%.12g" % r.harmonics.get(h, 0.0) for h in orders])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"run": _run, "bench": _bench, "analyze": _analyze}[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
