"""Fitted max-gradient slope against grid resolution for one (d, m)."""

import argparse

import numpy as np

from insulated_gap.exponents import blowup_rate
from insulated_gap.gap_solver import GridSpec
from insulated_gap.harness import SweepConfig, fit_table, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--m", type=float, default=2.0)
    ap.add_argument("--grading", type=float, default=1.0)
    args = ap.parse_args()
    target = blowup_rate(args.d, args.m)[0]
    print(f"target {target:.4f}")
    print(f"{'grid':>10} {'slope':>8} {'dev':>7} {'max_grad(eps_min)':>18}")
    for nr, ns in [(128, 8), (256, 16), (512, 32), (1024, 64)]:
        cfg = SweepConfig(d=args.d, m=args.m, epsilons=tuple(np.logspace(-2, -4, 6)),
                          grids=(GridSpec(nr, ns, args.grading),))
        res = run_sweep(cfg)
        fit = fit_table(res, "max_grad", args.d, args.m)
        print(f"{nr:>5}x{ns:<4} {fit.slope:8.4f} {fit.deviation:7.4f} {res.column('max_grad')[-1]:18.6f}")


if __name__ == "__main__":
    main()
