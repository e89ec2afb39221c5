#!/usr/bin/env python3
"""Mean per-window analysis time of the four algorithms on one case."""

import argparse

from csewt.harness import benchmark, load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--case", default="A")
    ap.add_argument("--trials", type=int, default=100)
    args = ap.parse_args()
    res = benchmark(load_scenario(args.case, trials=args.trials))
    for algo, sec in sorted(res.seconds.items(), key=lambda kv: kv[1]):
        print(f"{algo:6s} {1000 * sec:8.2f} ms")
    print(f"{res.windows} windows, CSEWT < CSDFT: {res.ordering_ok}")


if __name__ == "__main__":
    main()
