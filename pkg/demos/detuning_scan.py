"""Final selectivity of level 2 against a common detuning, sequential and simultaneous pulses.

Writes detuning_scan.csv next to the current directory; pass --jobs N to
spread the points over N processes.
"""

import argparse
import csv

import numpy as np

from chiralwave.threewave import detuning_scan, sequential_sequence, simultaneous_sequence

ap = argparse.ArgumentParser()
ap.add_argument("--jobs", type=int, default=1)
ap.add_argument("--out", default="detuning_scan.csv")
args = ap.parse_args()

deltas = np.linspace(0, 0.6, 31)
phis = [0.0, np.pi / 2]
seq = detuning_scan(sequential_sequence(), phis, deltas, jobs=args.jobs)
sim = detuning_scan(simultaneous_sequence(), phis, deltas, jobs=args.jobs)

with open(args.out, "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["delta", "seq_phi0", "seq_phi_half_pi", "sim_phi0", "sim_phi_half_pi"])
    for j, d in enumerate(deltas):
        w.writerow([f"{d:.4g}"] + [f"{x:.6f}" for x in (seq[0, j, 1], seq[1, j, 1], sim[0, j, 1], sim[1, j, 1])])
print(f"wrote {args.out}")
