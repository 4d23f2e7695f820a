"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines bypass
output capture so they land in the log either way.
"""

import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from insulated_gap import exponents as ex
from insulated_gap.gap_solver import GridSpec, ModeProblem, max_gradient, solve_mode
from insulated_gap.geometry import FlatPlates, build_chart
from insulated_gap.harness import SweepConfig, fit_table, run_sweep
from insulated_gap.radial_ode import (GapODEProblem, certify_bounds, mode_decay, p_poly, r0_C0,
                                      solve_g)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
RATE_CASES = [(3, 2), (3, 3), (4, 2)]


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, seconds, limit, detail):
        ok = bool(ok) and seconds < limit
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}  {detail}  ({seconds:.2f} s, limit {limit:g} s)")
        assert ok, detail
    return emit


def test_criterion_1_exponent_algebra(verdict):
    t0 = time.perf_counter()
    a32 = abs(ex.alpha(3, 2) - (math.sqrt(2) - 1))
    ds, ms = range(3, 13), (2, 2.5, 3, 4, 6, 10)
    worst = max(ex.quadratic_residual(ex.alpha(d, m), d, m) for d in ds for m in ms)
    mono_d = all(ex.alpha(d + 1, m) > ex.alpha(d, m) for d in range(3, 12) for m in ms)
    mono_m = all(ex.alpha(d, b) < ex.alpha(d, a) for d in ds for a, b in zip(ms, ms[1:]))
    rng = np.random.default_rng(20260)
    p1 = max(abs(float(p_poly(b, 3, 2, 1.0))) for b in rng.uniform(-5, 5, 100))
    dt = time.perf_counter() - t0
    verdict(1, a32 <= 1e-12 and worst <= 1e-12 and mono_d and mono_m and p1 <= 1e-12, dt, 1.0,
            f"|alpha(3,2)-(sqrt2-1)|={a32:.1e} max residual={worst:.1e} "
            f"monotone d/m={mono_d}/{mono_m} max|p(1)|={p1:.1e}")


def test_criterion_2_ode_limits(verdict):
    errs, times = [], []
    for eps, ref in ((1e-12, lambda r: r ** (math.sqrt(2) - 1)), (1e8, lambda r: r)):
        t0 = time.perf_counter()
        sol = solve_g(GapODEProblem(eps, 3, 2, 1.0))
        times.append(time.perf_counter() - t0)
        r = np.linspace(0.1, 1.0, 2001)
        errs.append(float(np.abs(sol.evaluate(r)[0] - ref(r)).max()))
    verdict(2, max(errs) <= 1e-3, max(times), 1.0,
            f"sup error eps=1e-12: {errs[0]:.1e}, eps=1e8: {errs[1]:.1e}")


def test_criterion_3_radial_certificates(verdict):
    t0 = time.perf_counter()
    violations, cases = 0, 0
    for eps in (1e-2, 1e-3, 1e-4, 1e-5):
        for d in (3, 4):
            for m in (2, 3):
                prob = GapODEProblem(eps, d, m, 2 / m)
                cert = certify_bounds(prob, solve_g(prob), a0=1.0, b0=2.0)
                violations += cert.violations
                cases += 1
    exact = all(abs(r0_C0(eps, 3, 2, 1.0, 1.0, 2.0)[0] - eps / 2) <= 4 * np.spacing(eps / 2)
                for eps in (1e-2, 1e-3, 1e-4, 1e-5))
    dt = time.perf_counter() - t0
    verdict(3, violations == 0 and exact, dt, 10.0,
            f"{cases} cases, {violations} violations, r0 = eps/2 exact: {exact}")


def test_criterion_4_mode_decay(verdict):
    t0 = time.perf_counter()
    sups = {(k, eps): mode_decay(GapODEProblem(eps, 3, 2, 1.0, k)).sup_ratio
            for k in (1, 2, 3) for eps in (1e-3, 1e-4)}
    dt = time.perf_counter() - t0
    worst = max(sups.values())
    verdict(4, worst <= 1 + 1e-3, dt, 5.0, f"max sup V_k/r^alpha_k = {worst:.6f}")


def test_criterion_5_solver_validation(verdict, mms):
    t0 = time.perf_counter()
    chart = build_chart(FlatPlates(epsilon=1e-3, R0=0.3))
    flat = solve_mode(ModeProblem(chart, d=3, grid=GridSpec(256, 32)))
    ferr = abs(max_gradient(flat).max_gradient - 1.0)
    errs = mms([(32, 8), (64, 16), (128, 32), (256, 64)])
    ratios = errs[:-1] / errs[1:]
    dt = time.perf_counter() - t0
    ok = ferr <= 1e-3 and bool(np.all((ratios >= 3.5) & (ratios <= 4.5)))
    verdict(5, ok, dt, 30.0, f"flat max-gradient error {ferr:.1e}; MMS ratios "
            + ", ".join(f"{x:.3f}" for x in ratios))


@pytest.fixture(scope="module")
def rate_sweeps():
    out, t0 = {}, time.perf_counter()
    for d, m in RATE_CASES:
        cfg = replace(SweepConfig.from_json(CONFIGS / f"d{d}_m{m}.json"), out_dir=None)
        out[(d, m)] = run_sweep(cfg)
    return out, time.perf_counter() - t0


def test_criterion_6_blowup_rate(verdict, rate_sweeps):
    sweeps, dt = rate_sweeps
    parts, ok = [], True
    for (d, m), res in sweeps.items():
        assert max(g.nr for g in res.config.grids) <= 1024 and max(g.ns for g in res.config.grids) <= 64
        assert len(res.rows) == 6 and res.config.epsilons[0] == 1e-2 and res.config.epsilons[-1] == 1e-4
        fit = fit_table(res, "max_grad", d, m)
        ok &= fit.deviation <= 0.05
        parts.append(f"(d={d},m={m}) slope {fit.slope:.4f} target {fit.target:.4f}")
    verdict(6, ok, dt, 600.0, "; ".join(parts))


def test_criterion_7_lower_bound(verdict, rate_sweeps):
    sweeps, dt = rate_sweeps
    parts, ok = [], True
    for (d, m), res in sweeps.items():
        a = ex.alpha(d, m)
        scaled = res.column("u_at_eps1m") * res.column("epsilon") ** (-a / m)
        c1 = res.column("c1_est")
        sub = bool(np.all(res.diag("subsolution_ok")))
        spread_u, spread_c = scaled.max() / scaled.min(), c1.max() / c1.min()
        ok &= spread_u < 2 and c1.min() > 0 and spread_c < 2 and sub
        parts.append(f"(d={d},m={m}) U-spread {spread_u:.3f} C1 in [{c1.min():.3f},{c1.max():.3f}] "
                     f"subsolution {sub}")
    verdict(7, ok, dt, 600.0, "; ".join(parts))


def test_criterion_8_pointwise_profile(verdict, rate_sweeps):
    sweeps, dt = rate_sweeps
    parts, ok = [], True
    for (d, m), res in sweeps.items():
        sups = res.diag("profile_sup").astype(float)
        ok &= bool(np.all(np.isfinite(sups))) and sups.max() / sups.min() < 2
        parts.append(f"(d={d},m={m}) bound {sups.max():.4f} spread {sups.max() / sups.min():.3f}")
    verdict(8, ok, dt, 600.0, "; ".join(parts))
