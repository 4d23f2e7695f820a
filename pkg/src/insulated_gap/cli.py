"""Command line entry point: ``insulated-gap <command> ...`` (or ``python -m insulated_gap``)."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import exponents as ex
from .gap_solver import (GridSpec, ModeProblem, SolverSpec, cell_table, max_gradient,
                         radial_table, solve_mode)
from .geometry import FlatPlates, InclusionPair, build_chart
from .harness import SweepConfig, dump_json, fit_table, read_sweep_csv, run_sweep, verify_all
from .radial_ode import (GapODEProblem, certify_bounds, mode_decay, solve_g,
                         uniqueness_diagnostic)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def cmd_exponent(args) -> int:
    res = ex.exponent_summary(args.d, args.m, args.k)
    print(dump_json(res.as_dict()))
    return 0


def cmd_solve_ode(args) -> int:
    prob = GapODEProblem(args.epsilon, args.d, args.m, args.lam, args.k)
    sol = solve_g(prob)
    summary = {"epsilon": prob.epsilon, "d": prob.d, "m": prob.m, "lambda": prob.lam, "k": prob.k,
               "nodes": int(sol.grid.size), "r_min": sol.r_min}
    ok = True
    if prob.k == 1:
        cert = certify_bounds(prob, sol)
        uniq = uniqueness_diagnostic(prob, sol)
        summary["certificate"] = cert.as_dict()
        summary["uniqueness"] = {"I_at_rmin": uniq.I_min_radius, "diverges": uniq.diverges}
        ok = cert.ok
    else:
        rep = mode_decay(prob)
        summary["decay"] = {"alpha_k": rep.alpha_k, "sup_ratio": rep.sup_ratio}
        ok = rep.sup_ratio <= 1 + 1e-3
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        _write_csv(out, ("r", "g", "g_prime"), zip(sol.grid, sol.values, sol.derivative))
        with open(out.with_suffix(".json"), "w") as fh:
            dump_json(summary, fh)
    print(dump_json(summary))
    return 0 if ok else 1


def _gap_problem(doc: dict, epsilon: float) -> ModeProblem:
    m = float(doc.get("m", 2.0))
    r1, r2 = float(doc.get("r1", 1.0)), float(doc.get("r2", 1.0))
    R0 = doc.get("R0") or 0.3 * min(r1, r2)
    if doc.get("shape", "ellipsoid") == "flat":
        pair = FlatPlates(epsilon=epsilon, R0=R0, m=m)
    else:
        pair = InclusionPair(epsilon=epsilon, R0=R0, m=m, r1=r1, r2=r2)
    grid = doc.get("grid", {})
    solver = doc.get("solver", {})
    return ModeProblem(build_chart(pair), d=int(doc.get("d", 3)),
                       grid=GridSpec(int(grid.get("nr", 512)), int(grid.get("ns", 32)),
                                     float(grid.get("grading", 1.0))),
                       solver=SolverSpec(tol=solver.get("tol", 1e-10), max_iter=solver.get("max_iter", 20_000),
                                         method=solver.get("method", "auto")),
                       lateral_value=doc.get("lateral_value"))


def cmd_solve_gap(args) -> int:
    with open(args.config) as fh:
        doc = json.load(fh)
    eps_list = [doc["epsilon"]] if "epsilon" in doc else doc.get("epsilons", [1e-3])
    out = Path(args.out or doc.get("out_dir") or ".")
    out.mkdir(parents=True, exist_ok=True)
    summaries = []
    for eps in eps_list:
        prob = _gap_problem(doc, float(eps))
        sol = solve_mode(prob)
        tag = f"eps{float(eps):.3e}"
        _write_csv(out / f"gap_{tag}_field.csv", ("r", "s", "u", "grad_r", "grad_d"), cell_table(sol))
        _write_csv(out / f"gap_{tag}_radial.csv", ("r", "U", "M"), radial_table(sol))
        diag = sol.diagnostics()
        diag.pop("seconds")
        diag |= {"epsilon": float(eps),
                 "max_gradient": max_gradient(sol, prob.chart.R0 / 2).max_gradient}
        with open(out / f"gap_{tag}_diagnostics.json", "w") as fh:
            dump_json(diag, fh)
        summaries.append(diag)
    print(dump_json(summaries))
    return 0


def cmd_sweep(args) -> int:
    cfg = SweepConfig.from_json(args.config)
    if args.out:
        cfg = SweepConfig(**{**cfg.__dict__, "out_dir": args.out})
    res = run_sweep(cfg)
    fit = fit_table(res, "max_grad", cfg.d, cfg.m)
    print(dump_json({"fit": fit.as_dict(), "rows": [r.csv_row() for r in res.rows],
                     "out_dir": cfg.out_dir}))
    return 0


def cmd_fit(args) -> int:
    table = read_sweep_csv(args.infile)
    window = tuple(args.window) if args.window else None
    fit = fit_table(table, args.quantity, args.target_d, args.target_m, window)
    print(dump_json(fit.as_dict()))
    return 0


def cmd_verify(args) -> int:
    cfg = SweepConfig.from_json(args.config)
    report = verify_all(cfg)
    text = dump_json(report)
    if args.report:
        Path(args.report).write_text(text)
    elif cfg.out_dir:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out_dir) / "report.json").write_text(text)
    print(text)
    for name, sec in report["sections"].items():
        print(f"{'PASS' if sec.get('pass') else 'FAIL'}  {name}", file=sys.stderr)
    return 0 if report["pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="insulated-gap", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("exponent", help="print alpha, alpha_k, rate and beta")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--m", type=float, required=True)
    s.add_argument("--k", type=int, default=1)
    s.set_defaults(func=cmd_exponent)

    s = sub.add_parser("solve-ode", help="solve the radial ODE and certify its bounds")
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--m", type=float, required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=1.0)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--out", help="CSV path for (r, g, g_prime); the summary goes next to it as .json")
    s.set_defaults(func=cmd_solve_ode)

    s = sub.add_parser("solve-gap", help="solve the flattened gap problem")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve_gap)

    s = sub.add_parser("sweep", help="epsilon sweep, writes sweep.csv")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("fit", help="log-log fit of a sweep column")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--quantity", required=True,
                   choices=("max_grad", "u_at_eps1m", "grad_lb", "c1_est"))
    s.add_argument("--target-d", type=int, required=True)
    s.add_argument("--target-m", type=float, required=True)
    s.add_argument("--window", type=int, nargs=2, metavar=("START", "STOP"))
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("verify", help="run every check and emit a JSON report")
    s.add_argument("--config", required=True)
    s.add_argument("--report")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    np.seterr(all="ignore")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
