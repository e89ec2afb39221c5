#!/usr/bin/env python3
"""Run cases A to F with every algorithm and print the worst mean E_fc per point.

Tables land in ``--out`` as case_X.csv / case_X.json.  Case A is run at
each phase setting of its scenario file, into one subdirectory each.
"""

import argparse
import math
import time
from pathlib import Path

from csewt.harness import ALGORITHMS, load_scenario, run_scenario, scenario_phases


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cases", default="ABCDEF")
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    for case in args.cases.upper():
        phases = scenario_phases(case) if case == "A" else [scenario_phases(case)[0]]
        for ph in phases:
            out = Path(args.out)
            if len(phases) > 1:
                out = out / f"phase_{round(math.degrees(ph)):+d}"
            t0 = time.perf_counter()
            cfg = load_scenario(case, trials=args.trials, seed=args.seed, phase=ph, out_dir=str(out))
            report = run_scenario(cfg)
            print(f"case {case} phase {math.degrees(ph):+.0f} deg  ({time.perf_counter() - t0:.0f} s)")
            for f1, snr in cfg.points():
                cells = []
                for algo in ALGORITHMS:
                    errs = report.errors(algo, f1=f1, snr_db=snr)
                    worst = max(errs, key=errs.get)
                    cells.append(f"{algo} {100 * errs[worst]:7.3f}% @{worst:g}")
                print(f"  f1={f1:<5g} snr={snr:<4g}  " + "  ".join(cells))


if __name__ == "__main__":
    main()
