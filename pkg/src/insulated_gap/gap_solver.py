"""Axisymmetric first-mode problem in the flattened gap.

Unknown: the first spherical-harmonic mode u(r, x_d) of the potential, on the
window r <= R0 between the two inclusions, written in chart coordinates
(r, s) in [0, R0] x [0, 1]. The discrete problem minimizes the quadratic form

    a(u, u) = int r^(d-2) (A grad u) . grad u + (d-2) r^(d-4) delta u^2  dr ds

over nodal values on a tensor grid, with u = 0 on the axis and Dirichlet
data on r = R0. Insulation on the inclusion boundaries is the natural
(conormal) condition of the form and needs no special rows.

Quadrature choices:
  * r-r and zero-order terms integrate the radial weight exactly per cell
    and lump in s; the zero-order term is lumped so that u = r is reproduced
    exactly when delta is constant.
  * s-s terms lump in r (keeps the strongly anisotropic part an M-matrix).
  * the cross term uses cell-averaged difference quotients (9-point stencil).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import FlattenedChart

_GX, _GW = np.polynomial.legendre.leggauss(4)
_GX = 0.5 * (_GX + 1.0)
_GW = 0.5 * _GW


class AssemblyError(RuntimeError):
    pass


class SolverNotConverged(RuntimeError):
    def __init__(self, msg, diagnostics):
        super().__init__(msg)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class GridSpec:
    nr: int = 256
    ns: int = 32
    grading: float = 1.0  # 0: uniform in r, 1: uniform in int_0^r dt / delta_model(t)^(1/m)

    def __post_init__(self):
        if self.nr < 8 or self.ns < 8:
            raise ValueError(f"need nr, ns >= 8, got {self.nr} x {self.ns}")
        if not 0.0 <= self.grading <= 1.0:
            raise ValueError(f"grading must lie in [0, 1], got {self.grading}")


@dataclass(frozen=True)
class SolverSpec:
    tol: float = 1e-10
    max_iter: int = 20_000
    method: str = "auto"  # auto | direct | cg
    direct_limit: int = 100_000


@dataclass(frozen=True, eq=False)
class ModeProblem:
    chart: FlattenedChart
    d: int = 3
    grid: GridSpec = field(default_factory=GridSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    lateral_value: float | None = None               # None -> R0, i.e. the trace of u = r
    lateral_profile: Callable | None = None          # u(R0, s), overrides lateral_value
    source: Callable | None = None                   # F(r, s) in chart measure
    flux_top: Callable | None = None                 # conormal flux on s = 1, per unit r
    flux_bottom: Callable | None = None              # conormal flux on s = 0, per unit r

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 3:
            raise ValueError(f"d must be an integer >= 3, got {self.d}")

    def lateral_data(self, s):
        if self.lateral_profile is not None:
            return np.asarray(self.lateral_profile(s), dtype=float) * np.ones_like(s)
        v = self.chart.R0 if self.lateral_value is None else self.lateral_value
        return np.full_like(s, float(v))


def radial_nodes(chart: FlattenedChart, grid: GridSpec, n_fine: int = 20_000) -> np.ndarray:
    """Radii clustered where the gap is thin.

    The graded coordinate xi(r) = int_0^r dt / (eps + lambda0 t^m)^(1/m) is
    blended with r/R0 by ``grid.grading`` and sampled uniformly.
    """
    pair = chart.pair
    R0 = pair.R0
    # fine grid geometric toward the origin so xi is resolved at r ~ eps^(1/m)
    rt = max(pair.epsilon ** (1.0 / pair.m), 1e-12)
    fine = np.unique(np.concatenate([
        [0.0], np.geomspace(min(rt * 1e-3, R0 * 1e-6), R0, n_fine), np.linspace(0, R0, 2001)]))
    dens = 1.0 / pair.model_delta(fine) ** (1.0 / pair.m)
    xi = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(fine))])
    phi = (1 - grid.grading) * fine / R0 + grid.grading * xi / xi[-1]
    r = np.interp(np.linspace(0.0, 1.0, grid.nr + 1), phi, fine)
    r[0], r[-1] = 0.0, R0
    if np.any(np.diff(r) <= 0):
        raise ValueError("radial grading produced non-increasing nodes")
    return r


# --- assembly --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AssembledSystem:
    problem: ModeProblem
    r: np.ndarray
    s: np.ndarray
    K: sp.csr_matrix          # full nodal matrix, (nr+1)(ns+1) square
    load: np.ndarray          # full nodal load vector
    A: sp.csr_matrix          # reduced SPD matrix on free nodes
    b: np.ndarray             # reduced right-hand side
    free: np.ndarray          # boolean mask of free nodes (flattened, i-major)
    dirichlet_values: np.ndarray

    @property
    def shape(self):
        return len(self.r), len(self.s)


def _gauss_points(r):
    a, h = r[:-1], np.diff(r)
    x = a[:, None] + h[:, None] * _GX[None, :]
    return x, h[:, None] * _GW[None, :]


def assemble(problem: ModeProblem) -> AssembledSystem:
    chart, d = problem.chart, problem.d
    pair = chart.pair
    r = radial_nodes(chart, problem.grid)
    ns = problem.grid.ns
    s = np.linspace(0.0, 1.0, ns + 1)
    nr = len(r) - 1
    NR, NS = nr + 1, ns + 1
    ds = 1.0 / ns
    dr = np.diff(r)

    def node(i, j):
        return i * NS + j

    xq, wq = _gauss_points(r)                         # (nr, 4)
    h1, h2, h1p, h2p, _, _ = pair.graphs(xq)
    delta = pair.epsilon + h1 - h2
    dprime = h1p - h2p
    w = xq ** (d - 2)
    # hat functions on each interval: left node weight 1 - t, right node t
    t = (xq - r[:-1, None]) / dr[:, None]
    phiL, phiR = 1.0 - t, t

    rows, cols, vals = [], [], []

    def add(p, q, v):
        rows.append(np.ravel(p)), cols.append(np.ravel(q)), vals.append(np.ravel(v))

    def add_edge(p, q, k):
        add(p, p, k), add(q, q, k), add(p, q, -k), add(q, p, -k)

    # r-r: exact radial weight, trapezoid (lumped) in s
    Wd = (w * delta * wq).sum(axis=1)                # (nr,)
    omega = np.full(NS, ds)
    omega[[0, -1]] = ds / 2
    I, J = np.meshgrid(np.arange(nr), np.arange(NS), indexing="ij")
    add_edge(node(I, J), node(I + 1, J), (Wd / dr ** 2)[:, None] * omega[None, :])

    # s-s: lumped in r with hat weights, midpoint in s
    smid = 0.5 * (s[1:] + s[:-1])                      # (ns,)
    tilt = h2p[:, :, None] + smid[None, None, :] * dprime[:, :, None]   # (nr, 4, ns)
    ass = (tilt ** 2 + 1.0) / delta[:, :, None]
    base = (w * wq)[:, :, None] * ass
    kL = (base * phiL[:, :, None]).sum(axis=1) / ds  # (nr, ns) contribution to node i
    kR = (base * phiR[:, :, None]).sum(axis=1) / ds  # contribution to node i+1
    I, J = np.meshgrid(np.arange(nr), np.arange(ns), indexing="ij")
    add_edge(node(I, J), node(I, J + 1), kL)
    add_edge(node(I + 1, J), node(I + 1, J + 1), kR)

    # cross term, cell-averaged difference quotients
    int_wh2p = (w * h2p * wq).sum(axis=1)
    int_wdp = (w * dprime * wq).sum(axis=1)
    C = -(int_wh2p[:, None] + smid[None, :] * int_wdp[:, None]) * ds      # int over cell of w A_rs
    X = C / (2.0 * dr[:, None] * ds)
    corners = [node(I, J), node(I + 1, J), node(I + 1, J + 1), node(I, J + 1)]
    va = (-1.0, 1.0, 1.0, -1.0)    # a1 + a2 (r-differences)
    vb = (-1.0, -1.0, 1.0, 1.0)    # b1 + b2 (s-differences)
    for p, cp_a, cp_b in zip(corners, va, vb):
        for q, cq_a, cq_b in zip(corners, va, vb):
            coef = 0.5 * (cp_a * cq_b + cp_b * cq_a)
            if coef != 0.0:
                add(p, q, X * coef)

    # zero-order term lumped to be exact on u = r for constant delta
    zc = (d - 2) * xq ** (d - 3) * delta * wq
    Z = np.zeros(NR)
    np.add.at(Z, np.arange(nr), (zc * phiL).sum(axis=1))
    np.add.at(Z, np.arange(1, nr + 1), (zc * phiR).sum(axis=1))
    Z[1:] /= r[1:]
    Z[0] = 0.0  # axis node is Dirichlet
    I, J = np.meshgrid(np.arange(NR), np.arange(NS), indexing="ij")
    add(node(I, J), node(I, J), Z[:, None] * omega[None, :])

    N = NR * NS
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N)).tocsr()
    K = ((K + K.T) * 0.5).tocsr()

    load = np.zeros(N)
    if problem.source is not None:
        R, S = np.meshgrid(r, s, indexing="ij")
        # lumped: int F phi_i dr at s_j, times omega_j
        F = problem.source(xq[:, :, None], s[None, None, :])  # (nr, 4, NS)
        FL = (F * (wq * phiL)[:, :, None]).sum(axis=1)
        FR = (F * (wq * phiR)[:, :, None]).sum(axis=1)
        Fn = np.zeros((NR, NS))
        Fn[:-1] += FL
        Fn[1:] += FR
        load += (Fn * omega[None, :]).ravel()
    for fn, j in ((problem.flux_bottom, 0), (problem.flux_top, ns)):
        if fn is None:
            continue
        g = fn(xq)
        gn = np.zeros(NR)
        gn[:-1] += (g * wq * phiL).sum(axis=1)
        gn[1:] += (g * wq * phiR).sum(axis=1)
        load[node(np.arange(NR), j)] += gn

    ud = np.zeros((NR, NS))
    ud[-1, :] = problem.lateral_data(s)
    free2 = np.ones((NR, NS), dtype=bool)
    free2[0, :] = False
    free2[-1, :] = False
    free = free2.ravel()
    udf = ud.ravel()
    A = K[free][:, free].tocsr()
    b = load[free] - K[free][:, ~free] @ udf[~free]

    diag = A.diagonal()
    bad = np.flatnonzero(diag <= 0)
    if bad.size:
        raise AssemblyError(f"non-positive diagonal at reduced row {bad[0]} (value {diag[bad[0]]:.3g})")
    return AssembledSystem(problem, r, s, K, load, A, b, free, udf)


def symmetry_defect(A, rng=None, trials: int = 3) -> float:
    """max |<Ax, y> - <x, Ay>| / (|A| |x| |y|) over random vectors."""
    rng = np.random.default_rng(0) if rng is None else rng
    scale = spla.norm(A, 1)
    worst = 0.0
    for _ in range(trials):
        x, y = rng.standard_normal(A.shape[0]), rng.standard_normal(A.shape[0])
        worst = max(worst, abs((A @ x) @ y - x @ (A @ y)) / (scale * np.linalg.norm(x) * np.linalg.norm(y)))
    return worst


# --- solution --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModeSolution:
    problem: ModeProblem
    r: np.ndarray
    s: np.ndarray
    values: np.ndarray          # (NR, NS)
    r_c: np.ndarray             # cell-center radii (nr,)
    s_c: np.ndarray             # cell-center s (ns,)
    grad_r: np.ndarray          # physical d/dr at fixed x_d, cell centers (nr, ns)
    grad_d: np.ndarray          # d/dx_d, cell centers
    residual: float
    iterations: int
    method: str
    seconds: float
    max_principle_excess: float

    @property
    def grad_norm(self) -> np.ndarray:
        return np.hypot(self.grad_r, self.grad_d)

    @property
    def mesh_size(self) -> float:
        """Largest physical cell diameter."""
        chart = self.problem.chart
        dr = np.diff(self.r)
        thick = chart.delta(self.r[1:]) / (len(self.s) - 1)
        return float(np.hypot(dr, thick).max())

    def diagnostics(self) -> dict:
        return {"residual": self.residual, "iterations": self.iterations, "method": self.method,
                "seconds": self.seconds, "max_principle_excess": self.max_principle_excess,
                "max_principle_ok": self.max_principle_excess <= 1e-9 * max(1.0, self.boundary_range()),
                "nr": len(self.r) - 1, "ns": len(self.s) - 1, "mesh_size": self.mesh_size}

    def boundary_range(self) -> float:
        lat = self.values[-1]
        return float(max(abs(lat).max(), 0.0))


def _cg(A, b, spec: SolverSpec):
    d = A.diagonal()
    M = sp.diags(1.0 / d)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.cg(A, b, rtol=spec.tol, maxiter=spec.max_iter, M=M, callback=cb)
    return x, count[0], info


def solve_mode(problem: ModeProblem, system: AssembledSystem | None = None) -> ModeSolution:
    """Solve the assembled system; raises SolverNotConverged on iteration failure."""
    t0 = time.perf_counter()
    sysm = assemble(problem) if system is None else system
    A, b = sysm.A, sysm.b
    spec = problem.solver
    method = spec.method
    if method == "auto":
        method = "direct" if A.shape[0] <= spec.direct_limit else "cg"
    if method == "direct":
        x = spla.splu(A.tocsc(), permc_spec="COLAMD").solve(b)
        iters = 1
    elif method == "cg":
        x, iters, info = _cg(A, b, spec)
        if info != 0:
            res = float(np.linalg.norm(b - A @ x) / max(np.linalg.norm(b), 1e-300))
            raise SolverNotConverged(
                f"CG stopped after {iters} iterations, relative residual {res:.3g}",
                {"iterations": iters, "residual": res, "info": int(info)})
    else:
        raise ValueError(f"unknown solver method {method!r}")
    bn = np.linalg.norm(b)
    residual = float(np.linalg.norm(b - A @ x) / (bn if bn > 0 else 1.0))
    if method == "direct" and not residual <= max(spec.tol, 1e-8):
        raise SolverNotConverged(f"direct solve residual {residual:.3g}", {"residual": residual})

    u = sysm.dirichlet_values.copy()
    u[sysm.free] = x
    NR, NS = sysm.shape
    U = u.reshape(NR, NS)
    r, s = sysm.r, sysm.s
    dr, ds = np.diff(r), s[1] - s[0]
    a = 0.5 * ((U[1:, :-1] - U[:-1, :-1]) + (U[1:, 1:] - U[:-1, 1:])) / dr[:, None]
    bq = 0.5 * ((U[:-1, 1:] - U[:-1, :-1]) + (U[1:, 1:] - U[1:, :-1])) / ds
    rc = 0.5 * (r[1:] + r[:-1])
    sc = 0.5 * (s[1:] + s[:-1])
    RC, SC = np.meshgrid(rc, sc, indexing="ij")
    gr, gd = problem.chart.physical_gradient(RC, SC, a, bq)

    if problem.source is None and problem.flux_top is None and problem.flux_bottom is None:
        bvals = np.concatenate([U[0], U[-1]])
        lo, hi = bvals.min(), bvals.max()
        excess = float(max(lo - U.min(), U.max() - hi, 0.0))
    else:
        excess = float("nan")
    for arr in (r, s, U, rc, sc, gr, gd):
        arr.setflags(write=False)
    return ModeSolution(problem, r, s, U, rc, sc, gr, gd, residual, iters, method,
                        time.perf_counter() - t0, excess)


# --- post-processing -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GradientProfile:
    r: np.ndarray
    M: np.ndarray
    max_gradient: float
    argmax_r: float


def max_gradient(sol: ModeSolution, r_max: float | None = None, r_min: float = 0.0) -> GradientProfile:
    """max |grad u| over cells with center radius in [r_min, r_max], and the profile M(r) = max_s |grad u|."""
    r_max = sol.problem.chart.R0 if r_max is None else r_max
    sel = (sol.r_c >= r_min) & (sol.r_c <= r_max)
    M = sol.grad_norm[sel].max(axis=1)
    k = int(np.argmax(M))
    return GradientProfile(sol.r_c[sel], M, float(M[k]), float(sol.r_c[sel][k]))


def gap_average(sol: ModeSolution) -> np.ndarray:
    """Trapezoidal s-average of u at each radial node; equals the physical x_d-average."""
    U = sol.values
    return (0.5 * (U[:, 0] + U[:, -1]) + U[:, 1:-1].sum(axis=1)) / (U.shape[1] - 1)


def interpolate_average(sol: ModeSolution, radius: float) -> float:
    return float(np.interp(radius, sol.r, gap_average(sol)))


def subsolution_margin(sol: ModeSolution) -> dict:
    """min over nodes of u - r, against the allowance 10 h^2 (h = largest physical cell diameter)."""
    R = np.broadcast_to(sol.r[:, None], sol.values.shape)
    h = sol.mesh_size
    margin = float((sol.values - R).min())
    return {"min_u_minus_r": margin, "allowance": 10 * h * h, "ok": margin >= -10 * h * h}


def cell_table(sol: ModeSolution) -> np.ndarray:
    """Rows (r, s, u, grad_r, grad_d) at cell centers; u is the corner average."""
    U = sol.values
    uc = 0.25 * (U[1:, 1:] + U[1:, :-1] + U[:-1, 1:] + U[:-1, :-1])
    RC, SC = np.meshgrid(sol.r_c, sol.s_c, indexing="ij")
    return np.column_stack([RC.ravel(), SC.ravel(), uc.ravel(), sol.grad_r.ravel(), sol.grad_d.ravel()])


def radial_table(sol: ModeSolution) -> np.ndarray:
    """Rows (r, U, M) at cell-center radii; U interpolated from nodes."""
    Uc = np.interp(sol.r_c, sol.r, gap_average(sol))
    M = sol.grad_norm.max(axis=1)
    return np.column_stack([sol.r_c, Uc, M])
