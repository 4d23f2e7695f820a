"""Log-slope of the radial solution g over [eps^(1/m), R0/2] as eps -> 0, against alpha.

The gap average U tracks g (the C1 plateau), so this isolates how slowly the
two-sided decay slope of U approaches alpha.
"""

import argparse

import numpy as np

from insulated_gap.exponents import alpha
from insulated_gap.radial_ode import GapODEProblem, solve_g


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--m", type=float, default=2.0)
    ap.add_argument("--R0", type=float, default=0.3)
    args = ap.parse_args()
    d, m = args.d, args.m
    lam0 = 2.0 / m
    a = alpha(d, m)
    print(f"alpha = {a:.4f}")
    for k in range(2, 13, 2):
        eps = 10.0 ** -k
        sol = solve_g(GapODEProblem(eps, d, m, lam0))
        rho = np.geomspace(eps ** (1 / m), args.R0 / 2, 64)
        slope = np.polyfit(np.log(rho), np.log(sol.evaluate(rho)[0]), 1)[0]
        print(f"eps=1e-{k:<3d} slope {slope:.4f}  slope-alpha {slope - a:+.4f}")


if __name__ == "__main__":
    main()
