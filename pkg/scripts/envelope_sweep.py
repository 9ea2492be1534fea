"""Largest undetected drift rate and reflection delay across estimator tunings.

    python scripts/envelope_sweep.py [--out envelope_sweep.csv]
"""
import argparse
import csv
import itertools
import sys

from gpsspoof.attack import NeverConverges, max_undetected_rate, measure_reflection_delay
from gpsspoof.estimator import FusionConfig
from gpsspoof.geo import LocalPos


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="envelope_sweep.csv")
    ap.add_argument("--offset-m", type=float, default=3.33)
    args = ap.parse_args(argv)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q_accel", "r_gps", "gate", "max_rate_mps", "delay_T", "delay_max_test_ratio"])
        for q, r, g in itertools.product((0.01, 0.03, 0.1, 1.0), (0.25, 0.5, 0.75, 1.5), (3.0, 5.0)):
            cfg = FusionConfig(q_accel=q, r_gps=r, gate=g)
            try:
                d = measure_reflection_delay(cfg, LocalPos(0.0, args.offset_m))
                T, tr = d.T, f"{d.max_test_ratio:.3f}"
            except NeverConverges:
                T, tr = "", ""
            row = [q, r, g, f"{max_undetected_rate(cfg):.2f}", T, tr]
            w.writerow(row)
            print(*row, sep="\t", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(run())
