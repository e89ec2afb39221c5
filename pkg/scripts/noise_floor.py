#!/usr/bin/env python3
"""Compare CSEWT with a genie least-squares fit across the case-F SNR ladder.

The genie knows every tone frequency and the disappearance time, so its
error is what noise alone leaves behind.  Both errors shrink about
tenfold per 20 dB.
"""

import argparse

import numpy as np

from csewt.harness import load_scenario, run_scenario
from csewt.signals import reference_energy, synthesize


def genie_errors(cfg, snr, trials):
    t = np.arange(round(cfg.fs * cfg.duration)) / cfg.fs
    stop = cfg.signal["events"][0]["time"]
    out = []
    for trial in range(trials):
        spec = cfg.spec(float(cfg.signal["f1"]), snr, cfg.seed + cfg.sweep.values.index(snr) * 100_000 + trial)
        u, i = synthesize(spec, cfg.fs, cfg.duration)
        cols = []
        for tone in spec.voltage:
            gate = np.ones_like(t) if tone.kind == "fundamental" else (t < stop).astype(float)
            cols += [gate * np.sin(2 * np.pi * tone.frequency * t), gate * np.cos(2 * np.pi * tone.frequency * t)]
        B = np.array(cols).T
        cu = np.linalg.lstsq(B, u.samples, rcond=None)[0]
        ci = np.linalg.lstsq(B, i.samples, rcond=None)[0]
        row = []
        for k, (tone, comp) in enumerate(zip(spec.voltage, spec.components())):
            span = cfg.duration if tone.kind == "fundamental" else stop
            w = 0.5 * (cu[2 * k] * ci[2 * k] + cu[2 * k + 1] * ci[2 * k + 1]) * span
            ref = reference_energy(spec, cfg.duration, comp)
            row.append(abs(w - ref) / abs(ref))
        out.append(row)
    return np.mean(out, axis=0).max()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=100)
    args = ap.parse_args()
    cfg = load_scenario("F", trials=args.trials, algorithms=("CSEWT",))
    rep = run_scenario(cfg)
    print("snr_db  csewt_max_efc  genie_max_efc")
    for snr in cfg.sweep.values:
        print(f"{snr:6g}  {100 * rep.worst('CSEWT', snr_db=snr):12.4f}%  {100 * genie_errors(cfg, snr, args.trials):12.4f}%")


if __name__ == "__main__":
    main()
