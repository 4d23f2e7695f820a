"""Epsilon sweeps, log-log rate fits and the bundled verification report."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import exponents as ex
from .gap_solver import (GridSpec, ModeProblem, SolverSpec, gap_average, interpolate_average,
                         max_gradient, solve_mode, subsolution_margin)
from .geometry import FlatPlates, GeometryError, InclusionPair, build_chart, validate_hypotheses
from .radial_ode import (GapODEProblem, certify_bounds, mode_decay, solve_g,
                         uniqueness_diagnostic)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("epsilon", "max_grad", "u_at_eps1m", "grad_lb", "c1_est")


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    d: int = 3
    m: float = 2.0
    r1: float = 1.0
    r2: float = 1.0
    R0: float | None = None
    epsilons: tuple = tuple(np.logspace(-2, -4, 6))
    grids: tuple = (GridSpec(512, 32),)   # one entry, or one per epsilon
    solver: SolverSpec = field(default_factory=SolverSpec)
    fit_window: tuple = (1, None)         # slice of epsilon indices entering the fits
    out_dir: str | None = None
    workers: int = 1
    lateral_value: float | None = None
    slope_tol: float = 0.05
    shape: str = "ellipsoid"              # or "flat" (control geometry, exact solution u = r)

    def __post_init__(self):
        if self.shape not in ("ellipsoid", "flat"):
            raise ValueError(f"shape must be 'ellipsoid' or 'flat', got {self.shape!r}")
        eps = np.asarray(self.epsilons, dtype=float)
        if eps.ndim != 1 or eps.size < 1 or np.any(eps <= 0):
            raise ValueError("epsilons must be a non-empty list of positive numbers")
        if np.any(np.diff(eps) >= 0):
            raise ValueError("epsilons must be strictly decreasing")
        if len(self.grids) not in (1, eps.size):
            raise ValueError("give one grid, or one grid per epsilon")
        if len(self.window_indices()) < 4:
            raise ValueError("fit window must contain at least 4 epsilons")
        ex.ExponentParams(self.d, self.m)

    @property
    def radius(self) -> float:
        return 0.3 * min(self.r1, self.r2) if self.R0 is None else self.R0

    def window_indices(self) -> list[int]:
        lo, hi = self.fit_window
        return list(range(len(self.epsilons)))[slice(lo, hi)]

    def grid_for(self, i: int) -> GridSpec:
        return self.grids[0] if len(self.grids) == 1 else self.grids[i]

    def pair(self, epsilon: float) -> InclusionPair | FlatPlates:
        if self.shape == "flat":
            return FlatPlates(epsilon=float(epsilon), R0=self.radius, m=self.m)
        return InclusionPair(epsilon=float(epsilon), R0=self.radius, m=self.m, r1=self.r1, r2=self.r2)

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        grid = doc.get("grid", {})
        nr, ns = grid.get("nr", 512), grid.get("ns", 32)
        grading = grid.get("grading", 1.0)
        eps = doc.get("epsilons")
        n = len(eps) if eps is not None else 6
        if isinstance(nr, list) or isinstance(ns, list):
            nrs = nr if isinstance(nr, list) else [nr] * n
            nss = ns if isinstance(ns, list) else [ns] * n
            grids = tuple(GridSpec(a, b, grading) for a, b in zip(nrs, nss))
        else:
            grids = (GridSpec(nr, ns, grading),)
        solver = doc.get("solver", {})
        window = doc.get("fit", {}).get("window", [1, None])
        kw = dict(
            d=int(doc.get("d", 3)), m=float(doc.get("m", 2.0)),
            r1=float(doc.get("r1", 1.0)), r2=float(doc.get("r2", 1.0)), R0=doc.get("R0"),
            grids=grids,
            solver=SolverSpec(tol=solver.get("tol", 1e-10), max_iter=solver.get("max_iter", 20_000),
                              method=solver.get("method", "auto")),
            fit_window=tuple(window), out_dir=doc.get("out_dir"),
            workers=int(doc.get("workers", 1)), lateral_value=doc.get("lateral_value"),
            shape=doc.get("shape", "ellipsoid"),
        )
        if eps is not None:
            kw["epsilons"] = tuple(float(e) for e in eps)
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        g = self.grids
        return {
            "d": self.d, "m": self.m, "r1": self.r1, "r2": self.r2, "R0": self.radius,
            "epsilons": list(map(float, self.epsilons)),
            "grid": {"nr": [x.nr for x in g] if len(g) > 1 else g[0].nr,
                     "ns": [x.ns for x in g] if len(g) > 1 else g[0].ns,
                     "grading": g[0].grading},
            "solver": {"tol": self.solver.tol, "max_iter": self.solver.max_iter, "method": self.solver.method},
            "fit": {"window": list(self.fit_window)}, "out_dir": self.out_dir,
            "shape": self.shape,
        }


# --- single-epsilon measurement -------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    max_grad: float
    u_at_eps1m: float
    grad_lb: float
    c1_est: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    def csv_row(self) -> list:
        return [self.epsilon, self.max_grad, self.u_at_eps1m, self.grad_lb, self.c1_est]


def measure(cfg: SweepConfig, i: int) -> SweepRow:
    """Solve the gap problem at epsilons[i] and extract every sweep observable."""
    eps = float(cfg.epsilons[i])
    d, m = cfg.d, cfg.m
    a = ex.alpha(d, m)
    pair = cfg.pair(eps)
    chart = build_chart(pair)
    prob = ModeProblem(chart, d=d, grid=cfg.grid_for(i), solver=cfg.solver,
                       lateral_value=cfg.lateral_value)
    try:
        sol = solve_mode(prob)
    except Exception as exc:  # identify the failing epsilon
        raise SweepError(f"solve failed at epsilon = {eps:.6g}: {exc}") from exc

    half = pair.R0 / 2
    rt = eps ** (1.0 / m)
    prof = max_gradient(sol, half)
    u_t = interpolate_average(sol, rt)

    # U / g on [eps^(1/m), R0/2]: the amplitude of the bounded radial solution
    rho = np.geomspace(rt, half, 32)
    U_rho = np.interp(rho, sol.r, gap_average(sol))
    if pair.lambda0 > 0:
        g_rho = solve_g(GapODEProblem(eps, d, m, pair.lambda0)).evaluate(rho)[0]
    else:
        g_rho = rho  # parallel plates: the radial solution is exactly r
    ratio = U_rho / g_rho

    shape = prof.M / (eps + pair.lambda0 * prof.r ** m) ** ((a - 1) / m)
    decay = U_rho / rho ** a
    sub = subsolution_margin(sol)
    diag = {
        "argmax_r": prof.argmax_r,
        "c1_spread": float(ratio.max() / ratio.min()),
        "profile_sup": float(shape.max()),
        "decay_sup": float(decay.max()),
        "decay_slope": float(np.polyfit(np.log(rho), np.log(U_rho), 1)[0]),
        "subsolution_min": sub["min_u_minus_r"],
        "subsolution_allowance": sub["allowance"],
        "subsolution_ok": bool(sub["ok"]),
        "max_principle_excess": sol.max_principle_excess,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "nr": len(sol.r) - 1,
        "ns": len(sol.s) - 1,
    }
    log.info("eps=%.4g grid=%dx%d max_grad=%.6g U(eps^1/m)=%.6g", eps, diag["nr"], diag["ns"],
             prof.max_gradient, u_t)
    return SweepRow(eps, prof.max_gradient, u_t, u_t / rt, float(ratio.mean()), diag)


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    rows: tuple

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def diag(self, name: str) -> np.ndarray:
        return np.array([r.diagnostics[name] for r in self.rows])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow([repr(float(v)) for v in r.csv_row()])

    def diagnostics_dict(self) -> dict:
        return {"config": self.config.to_dict(),
                "rows": [{"epsilon": r.epsilon} | r.diagnostics for r in self.rows]}


def _measure_star(args):
    return measure(*args)


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Measure every epsilon (in parallel if ``cfg.workers > 1``); rows keep config order."""
    jobs = [(cfg, i) for i in range(len(cfg.epsilons))]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_measure_star, jobs))
    else:
        rows = [measure(*j) for j in jobs]
    result = SweepResult(cfg, tuple(rows))
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.write_csv(out / "sweep.csv")
        with open(out / "sweep_diagnostics.json", "w") as fh:
            json.dump(result.diagnostics_dict(), fh, indent=2, sort_keys=True)
    return result


def read_sweep_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


# --- fitting ---------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residuals: tuple
    target: float
    deviation: float

    def as_dict(self) -> dict:
        return asdict(self) | {"residuals": list(self.residuals)}


def fit_rate(epsilons, values, target: float) -> RateFit:
    """Ordinary least squares of ln(values) on ln(epsilons)."""
    x = np.asarray(epsilons, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.shape != y.shape or x.size < 4:
        raise ValueError("need at least 4 paired measurements")
    if np.any(y <= 0) or np.any(x <= 0):
        raise ValueError("log-log fit needs positive measurements")
    X = np.column_stack([np.log(x), np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, np.log(y), rcond=None)
    res = np.log(y) - X @ coef
    return RateFit(float(coef[0]), float(coef[1]), tuple(map(float, res)), float(target),
                   float(abs(coef[0] - target)))


def target_exponent(quantity: str, d: int, m: float) -> float:
    a = ex.alpha(d, m)
    return {"max_grad": (a - 1) / m, "grad_lb": (a - 1) / m,
            "u_at_eps1m": a / m, "c1_est": 0.0}[quantity]


def fit_table(table, quantity: str, d: int, m: float, window=None) -> RateFit:
    """Fit a named column of a sweep (SweepResult or CSV columns) against its exponent."""
    if isinstance(table, SweepResult):
        eps, y = table.column("epsilon"), table.column(quantity)
        idx = table.config.window_indices() if window is None else list(range(len(eps)))[slice(*window)]
    else:
        eps, y = np.asarray(table["epsilon"]), np.asarray(table[quantity])
        idx = list(range(len(eps)))[slice(*(window or (None, None)))]
    return fit_rate(eps[idx], y[idx], target_exponent(quantity, d, m))


# --- verification report ---------------------------------------------------

def _section(ok: bool, **data) -> dict:
    return {"pass": bool(ok)} | data


def verify_all(cfg: SweepConfig, flat_grid: GridSpec = GridSpec(256, 32)) -> dict:
    """Run every check for ``cfg`` and collect a JSON-ready report.

    A failing geometry section skips everything downstream. ``report['pass']``
    is true iff every section that ran passed and none was skipped.
    """
    if cfg.shape != "ellipsoid":
        raise ValueError("verify_all runs on the inclusion geometry; use run_sweep for the flat control")
    d, m = cfg.d, cfg.m
    a = ex.alpha(d, m)
    rate, beta = ex.blowup_rate(d, m)
    report: dict = {"config": cfg.to_dict(), "targets": {
        "alpha": a, "rate": rate, "beta": beta, "alpha_k": [ex.alpha_k(d, m, k) for k in (1, 2, 3)]}}
    sections: dict = {}
    report["sections"] = sections

    sections["exponents"] = _section(
        0 < a < 1 and ex.quadratic_residual(a, d, m) <= 1e-12,
        statement="alpha is the positive root of the indicial quadratic; rate = (alpha-1)/m",
        residual=ex.quadratic_residual(a, d, m))

    try:
        pair = cfg.pair(min(cfg.epsilons))
        hyp = validate_hypotheses(pair)
        chart = build_chart(pair)
        sections["geometry"] = _section(True, statement="m-ellipsoid boundaries satisfy the profile, "
                                        "gradient and C2 hypotheses", hypotheses=hyp.as_dict(),
                                        chart=chart.diagnostics, lambda0=pair.lambda0)
    except (GeometryError, ValueError) as exc:
        sections["geometry"] = _section(False, error=str(exc))
        for name in ("radial_bounds", "mode_decay", "solver_control", "blowup_rate",
                     "lower_bound", "pointwise_profile", "mean_decay"):
            sections[name] = {"pass": False, "skipped": True, "reason": "geometry failed"}
        report["pass"] = False
        return report

    lam0 = pair.lambda0
    certs, uniq = [], []
    for eps in cfg.epsilons:
        prob = GapODEProblem(float(eps), d, m, lam0)
        sol = solve_g(prob)
        c = certify_bounds(prob, sol)
        u = uniqueness_diagnostic(prob, sol)
        certs.append({"epsilon": float(eps)} | c.as_dict())
        uniq.append({"epsilon": float(eps), "I_at_rmin": u.I_min_radius, "diverges": u.diverges})
    sections["radial_bounds"] = _section(
        all(c["ok"] for c in certs) and all(u["diverges"] for u in uniq),
        statement="r < g < r^alpha, envelope < g, g < C0 r on (0, r0); Green integral diverges at 0",
        certificates=certs, uniqueness=uniq)

    decay = []
    for k in (1, 2, 3):
        for eps in cfg.epsilons[-2:]:
            rep = mode_decay(GapODEProblem(float(eps), d, m, 1.0, k))
            decay.append({"k": k, "epsilon": float(eps), "alpha_k": rep.alpha_k, "sup_ratio": rep.sup_ratio})
    sections["mode_decay"] = _section(all(x["sup_ratio"] <= 1 + 1e-3 for x in decay),
                                      statement="V_k(r) <= V_k(1) r^alpha_k", cases=decay)

    flat = FlatPlates(epsilon=float(min(cfg.epsilons)), R0=pair.R0, m=m)
    fsol = solve_mode(ModeProblem(build_chart(flat), d=d, grid=flat_grid, solver=cfg.solver))
    ferr = abs(max_gradient(fsol).max_gradient - 1.0)
    sections["solver_control"] = _section(ferr <= 1e-3, statement="flat plates reproduce u = r",
                                          max_gradient_error=ferr)

    try:
        sweep = run_sweep(cfg)
    except SweepError as exc:
        for name in ("blowup_rate", "lower_bound", "pointwise_profile", "mean_decay"):
            sections[name] = _section(False, error=str(exc))
        report["pass"] = False
        return report

    fit = fit_table(sweep, "max_grad", d, m)
    sections["blowup_rate"] = _section(
        fit.deviation <= cfg.slope_tol and bool(np.all(np.diff(sweep.column("max_grad")) > 0)),
        statement="max |grad u| ~ eps^((alpha-1)/m)", fit=fit.as_dict(), tolerance=cfg.slope_tol,
        table=[r.csv_row() for r in sweep.rows])

    scaled = sweep.column("u_at_eps1m") * sweep.column("epsilon") ** (-a / m)
    c1 = sweep.column("c1_est")
    sub_ok = bool(np.all(sweep.diag("subsolution_ok")))
    sections["lower_bound"] = _section(
        scaled.max() / scaled.min() < 2 and c1.min() > 0 and c1.max() / c1.min() < 2 and sub_ok,
        statement="U(eps^(1/m)) >= eps^(alpha/m)/C; U = C1 g with C1 bounded below; u >= r",
        u_scaled=scaled.tolist(), c1=c1.tolist(), subsolution_ok=sub_ok,
        subsolution_min=sweep.diag("subsolution_min").tolist())

    sups = sweep.diag("profile_sup").astype(float)
    sections["pointwise_profile"] = _section(
        bool(np.all(np.isfinite(sups))) and sups.max() / sups.min() < 2,
        statement="M(r) <= C (eps + lambda0 r^m)^((alpha-1)/m) on r <= R0/2",
        bound=float(sups.max()), per_epsilon=sups.tolist())

    dsup = sweep.diag("decay_sup").astype(float)
    slopes = sweep.diag("decay_slope").astype(float)
    sections["mean_decay"] = _section(
        dsup.max() / dsup.min() < 2 and slopes.min() >= a - cfg.slope_tol,
        statement="U(rho) <= C rho^alpha on [eps^(1/m), R0/2]; decay exponent >= alpha - tol",
        bound=float(dsup.max()), slopes=slopes.tolist(), alpha=a, tolerance=cfg.slope_tol)

    report["pass"] = all(s.get("pass") for s in sections.values())
    return report


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj, fh=None, **kw) -> str | None:
    obj = _jsonable(obj)
    if fh is None:
        return json.dumps(obj, indent=2, sort_keys=True, **kw)
    json.dump(obj, fh, indent=2, sort_keys=True, **kw)
    return None
