"""Renormalized defect-interaction energy, its argmin, and the core cell problem.

W(b) packs what is left of the Dirichlet energy of the limiting unit-modulus
field after the universal pi k ln(1/rho) core divergence is subtracted:

    W(b) = -pi sum_{l != j} ln|b_l - b_j|  +  1/2 oint R dR/dnu
           +  oint h_b dR/dtau  +  1/2 int |grad h_b|^2,

with R(x) = sum_j ln|x - b_j| and h_b the harmonic correction matching the
boundary trace.  Everything analytic (R and its derivatives) is evaluated in
closed form; only h_b is numerical, via the grid's cached Laplace solve.

The k <= 2 argmin search exploits that the discrete harmonic extension is
linear in its boundary values: per-candidate solves are precomputed once and
every pair's field energy expands into Gram-matrix entries, so an exhaustive
coarse scan over all pairs is cheap.  A local refinement then polishes the
winner with exact W evaluations.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.optimize as sopt

from . import energy as en
from .domain import (BoundaryData, Disk, Grid, build_grid, make_boundary_data,
                     wrap_angle)
from .solver import PRField, SolveSchedule, init_field, minimize


class UnwrapFailureError(RuntimeError):
    """Boundary phase cannot be unwrapped (sampling too coarse)."""


class DefectTooCloseToBoundaryError(ValueError):
    """A configuration point is within 4h of the boundary."""


@dataclass(frozen=True, eq=False)
class Configuration:
    """An ordered tuple of pairwise-distinct defect positions."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
            raise ValueError("configuration needs finite (k, 2) points")
        object.__setattr__(self, "points", pts)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if np.hypot(*(pts[i] - pts[j])) == 0.0:
                    raise ValueError("configuration points must be pairwise distinct")

    @property
    def k(self) -> int:
        return len(self.points)


def _as_points(config) -> np.ndarray:
    if isinstance(config, Configuration):
        return config.points
    return Configuration(np.asarray(config, dtype=float)).points


def _unwrap(vals: np.ndarray, closed: bool = True) -> np.ndarray:
    """Continuous representative of a phase sequence along the loop."""
    inc = wrap_angle(np.diff(vals))
    if inc.size and np.abs(inc).max() >= 0.5 * np.pi:
        raise UnwrapFailureError("phase increment >= pi/2 between boundary nodes")
    out = np.concatenate([[vals[0]], vals[0] + np.cumsum(inc)])
    if closed:
        total = out[-1] - out[0] + wrap_angle(vals[0] - vals[-1])
        if abs(total) > 1e-6:
            raise UnwrapFailureError(
                f"unwrapped boundary phase fails to close (defect {total:.2e})")
    return out


def _corner_angles(grid: Grid, point) -> np.ndarray:
    return np.arctan2(grid.bpos[:, 1] - point[1], grid.bpos[:, 0] - point[0])


def _boundary_targets(grid: Grid, phases: np.ndarray, points: np.ndarray) -> np.ndarray:
    psi = phases.copy()
    for b in points:
        psi = psi - _corner_angles(grid, b)
    return _unwrap(psi)


def harmonic_from_phases(grid: Grid, phases: np.ndarray, points) -> np.ndarray:
    """Discrete harmonic h with h|boundary = unwrap(phases - sum of core angles)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float)) if len(np.atleast_1d(points)) \
        else np.zeros((0, 2))
    v = _boundary_targets(grid, phases, pts)
    return grid.solve_laplace(v)


def harmonic_h(config, bdata: BoundaryData, grid: Grid) -> np.ndarray:
    """Harmonic phase correction tying the core angles to the boundary trace."""
    pts = _as_points(config) if np.size(config) else np.zeros((0, 2))
    return harmonic_from_phases(grid, bdata.phases(), pts)


def limit_field(config, bdata: BoundaryData, grid: Grid) -> PRField:
    """The unit-modulus limiting field: |p| = |s|/2, phase = core angles + h."""
    pts = _as_points(config) if np.size(config) else np.zeros((0, 2))
    h = harmonic_h(pts, bdata, grid)
    phase = h.copy()
    for b in pts:
        phase += np.arctan2(grid.node_y - b[1], grid.node_x - b[0])
    u = np.zeros((3, grid.nx, grid.ny))
    amp = 0.5 * abs(bdata.s)
    u[0] = amp * np.cos(phase)
    u[1] = amp * np.sin(phase)
    u[2] = bdata.s / 3.0
    f = PRField(grid, u, bdata)
    f.apply_boundary()
    return f


def _boundary_margin_ok(grid: Grid, pts: np.ndarray, margin: float) -> bool:
    curve = grid.curve_xy
    for p in np.atleast_2d(pts):
        if np.min(np.hypot(curve[:, 0] - p[0], curve[:, 1] - p[1])) <= margin:
            return False
    return True


def _R_arrays(grid: Grid, pts: np.ndarray):
    """R, dR/dnu, dR/dtau at the boundary nodes (all analytic).

    The tangential derivative uses the clockwise tangent.  The boundary
    coupling term of the renormalized energy is orientation-sensitive, and
    this is the orientation under which the closed-form disk value
    -pi ln(1 - |b|^2) and the annulus recovery both come out right; the
    counterclockwise choice negates the h-coupling and flips the landscape.
    """
    R = np.zeros(len(grid.bpos))
    dnu = np.zeros_like(R)
    dtau = np.zeros_like(R)
    for b in pts:
        dx = grid.bpos[:, 0] - b[0]
        dy = grid.bpos[:, 1] - b[1]
        d2 = dx * dx + dy * dy
        R += 0.5 * np.log(d2)
        dnu += (dx * grid.bnormal[:, 0] + dy * grid.bnormal[:, 1]) / d2
        dtau -= (dx * grid.btangent[:, 0] + dy * grid.btangent[:, 1]) / d2
    return R, dnu, dtau


def _dirichlet_energy(grid: Grid, h: np.ndarray) -> float:
    hx, hy = en.cell_gradients(h, grid.h)
    return 0.5 * float(np.sum((hx**2 + hy**2)[grid.cell_active])) * grid.h**2


def renormalized_W(config, bdata: BoundaryData, grid: Grid) -> float:
    """All four terms of the renormalized energy at one configuration."""
    pts = _as_points(config)
    if not _boundary_margin_ok(grid, pts, 4.0 * grid.h):
        raise DefectTooCloseToBoundaryError("configuration within 4h of the boundary")
    pair = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            pair -= 2.0 * np.pi * np.log(np.hypot(*(pts[i] - pts[j])))
    R, dnu, dtau = _R_arrays(grid, pts)
    v = _boundary_targets(grid, bdata.phases(), pts)
    h = grid.solve_laplace(v)
    w = grid.bweight
    term2 = 0.5 * float(np.sum(w * R * dnu))
    term3 = float(np.sum(w * v * dtau))
    term4 = _dirichlet_energy(grid, h)
    return pair + term2 + term3 + term4


def annulus_energy(config, bdata: BoundaryData, grid: Grid, rho: float) -> float:
    """Half the Dirichlet energy of the limiting field off rho-disks at the cores."""
    pts = _as_points(config)
    f = limit_field(pts, bdata, grid)
    p1x, p1y = en.cell_gradients(f.u[0], grid.h)
    p2x, p2y = en.cell_gradients(f.u[1], grid.h)
    cx = 0.5 * (grid.xs[:-1] + grid.xs[1:])[:, None]
    cy = 0.5 * (grid.ys[:-1] + grid.ys[1:])[None, :]
    keep = grid.cell_active.copy()
    for b in pts:
        keep &= np.hypot(cx - b[0], cy - b[1]) >= rho
    dens = p1x**2 + p1y**2 + p2x**2 + p2y**2
    return 0.5 * float(np.sum(dens[keep])) * grid.h**2


def recover_W_annulus(config, bdata: BoundaryData, grid: Grid,
                      rhos=(0.15, 0.2, 0.25, 0.3)) -> tuple[float, list]:
    """Estimate W from the annulus identity, extrapolating the O(rho) tail.

    Returns (extrapolated W, [(rho, W_estimate)] rows).
    """
    pts = _as_points(config)
    k = len(pts)
    s24 = bdata.s**2 / 4.0
    rows = []
    for rho in sorted(rhos):
        e = annulus_energy(pts, bdata, grid, rho)
        rows.append((float(rho), e / s24 - np.pi * k * np.log(1.0 / rho)))
    if len(rows) >= 2:
        xs = np.array([r[0] for r in rows])
        ys = np.array([r[1] for r in rows])
        west = float(np.polyfit(xs, ys, 1)[1])
    else:
        west = rows[0][1]
    return west, rows


# ----------------------------------------------------------------------------
# argmin search


@dataclass
class ScanResult:
    rows: list                  # k=1: (x, y, W); k=2: (x1, y1, x2, y2, W)
    config: Configuration
    W: float
    cell: float                 # coarse scan lattice spacing
    refined_cell: float         # final local-refinement step


def _candidate_lattice(grid: Grid, scan: int, margin: float) -> np.ndarray:
    xmin, xmax, ymin, ymax = grid.shape.bbox()
    xs = np.linspace(xmin, xmax, scan + 2)[1:-1]
    ys = np.linspace(ymin, ymax, scan + 2)[1:-1]
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    inside = grid.shape.level(pts[:, 0], pts[:, 1]) < 0
    pts = pts[inside]
    keep = [i for i, p in enumerate(pts) if _boundary_margin_ok(grid, p[None], margin)]
    return pts[keep]


def _workers() -> int:
    return max(1, int(os.environ.get("NEMATICFILM_WORKERS", "1")))


class _PairScanner:
    """Precomputed per-candidate quantities for vectorized W evaluation."""

    def __init__(self, grid: Grid, bdata: BoundaryData, cand: np.ndarray,
                 workers: int | None = None):
        self.grid = grid
        self.bdata = bdata
        self.cand = cand
        n = len(cand)
        w = grid.bweight
        self.vd = _unwrap(bdata.phases(), closed=False)
        hd = grid.solve_laplace(self.vd)
        hdx, hdy = en.cell_gradients(hd, grid.h)
        ca = grid.cell_active
        self.dd = float(np.sum((hdx**2 + hdy**2)[ca])) * grid.h**2

        theta = np.empty((n, len(w)))
        R = np.empty_like(theta)
        dnu = np.empty_like(theta)
        dtau = np.empty_like(theta)
        for m, c in enumerate(cand):
            theta[m] = _unwrap(_corner_angles(grid, c), closed=False)
            R[m], dnu[m], dtau[m] = _R_arrays(grid, c[None])
        self.theta = theta

        grid._laplace_factor()
        nw = workers if workers is not None else _workers()

        def solve_grads(m):
            h = grid.solve_laplace(theta[m])
            hx, hy = en.cell_gradients(h, grid.h)
            return hx[ca], hy[ca]

        if nw > 1:
            with ThreadPoolExecutor(max_workers=nw) as pool:
                grads = list(pool.map(solve_grads, range(n)))
        else:
            grads = [solve_grads(m) for m in range(n)]
        Ax = np.stack([g[0] for g in grads])
        Ay = np.stack([g[1] for g in grads])
        h2 = grid.h**2
        self.G = (Ax @ Ax.T + Ay @ Ay.T) * h2
        self.d = (Ax @ hdx[ca] + Ay @ hdy[ca]) * h2
        self.A2 = (R * w) @ dnu.T
        self.A3 = (theta * w) @ dtau.T
        self.a3 = dtau @ (w * self.vd)
        self.s3 = dtau @ w
        self.th0 = theta[:, 0]
        self.vd0 = self.vd[0]

    def w_singles(self) -> np.ndarray:
        n = len(self.cand)
        idx = np.arange(n)
        shift = wrap_angle(self.vd0 - self.th0) - (self.vd0 - self.th0)
        term2 = 0.5 * self.A2[idx, idx]
        term3 = self.a3 - self.A3[idx, idx] + shift * self.s3
        term4 = 0.5 * (self.dd - 2.0 * self.d + self.G[idx, idx])
        return term2 + term3 + term4

    def w_pairs(self) -> np.ndarray:
        n = len(self.cand)
        dx = self.cand[:, 0][:, None] - self.cand[:, 0][None, :]
        dy = self.cand[:, 1][:, None] - self.cand[:, 1][None, :]
        dist = np.hypot(dx, dy)
        with np.errstate(divide="ignore"):
            pair = -2.0 * np.pi * np.log(dist)
        diag = np.arange(n)
        gd = self.G[diag, diag]
        a2d = self.A2[diag, diag]
        a3d = self.A3[diag, diag]
        term2 = 0.5 * (a2d[:, None] + a2d[None, :] + self.A2 + self.A2.T)
        raw0 = self.vd0 - self.th0[:, None] - self.th0[None, :]
        shift = wrap_angle(raw0) - raw0
        term3 = (self.a3[:, None] + self.a3[None, :]
                 - a3d[:, None] - a3d[None, :] - self.A3 - self.A3.T
                 + shift * (self.s3[:, None] + self.s3[None, :]))
        term4 = 0.5 * (self.dd + gd[:, None] + gd[None, :]
                       - 2.0 * self.d[:, None] - 2.0 * self.d[None, :] + 2.0 * self.G)
        W = pair + term2 + term3 + term4
        W[dist <= 4.0 * self.grid.h] = np.inf
        return W


def _refine(best_pts: np.ndarray, bdata, grid, step0: float, levels: int,
            margin: float):
    """Greedy coordinatewise local scans with exact W, halving the step."""
    best = np.asarray(best_pts, dtype=float).copy()
    bw = renormalized_W(best, bdata, grid)
    step = step0
    for _ in range(levels):
        step *= 0.5
        improved = True
        while improved:
            improved = False
            for i in range(len(best)):
                for di in (-1, 0, 1):
                    for dj in (-1, 0, 1):
                        if di == 0 and dj == 0:
                            continue
                        trial = best.copy()
                        trial[i, 0] += di * step
                        trial[i, 1] += dj * step
                        if not _boundary_margin_ok(grid, trial, margin):
                            continue
                        if len(trial) > 1:
                            dmin = min(np.hypot(*(trial[a] - trial[b]))
                                       for a in range(len(trial))
                                       for b in range(a + 1, len(trial)))
                            if dmin <= 4.0 * grid.h:
                                continue
                        try:
                            tw = renormalized_W(trial, bdata, grid)
                        except (DefectTooCloseToBoundaryError, ValueError):
                            continue
                        if tw < bw - 1e-12:
                            best, bw = trial, tw
                            improved = True
    return best, bw, step


def scan_W(bdata: BoundaryData, grid: Grid, k: int | None = None,
           scan: int = 16, margin: float | None = None,
           refine_levels: int = 4, workers: int | None = None) -> ScanResult:
    """Exhaustive coarse-to-fine search of W over k-point configurations (k <= 2)."""
    if k is None:
        k = bdata.k
    if k not in (1, 2):
        raise ValueError("scan search supports k = 1 or 2")
    if margin is None:
        margin = max(6.0 * grid.h, 0.05 * grid.shape.min_feature())
    cand = _candidate_lattice(grid, scan, margin)
    if len(cand) == 0:
        raise ValueError("no scan candidates inside the margin")
    sc = _PairScanner(grid, bdata, cand, workers)
    xmin, xmax, _, _ = grid.shape.bbox()
    cell = (xmax - xmin) / (scan + 1)
    rows = []
    if k == 1:
        Ws = sc.w_singles()
        for (x, y), wv in zip(cand, Ws):
            rows.append((float(x), float(y), float(wv)))
        m = int(np.argmin(Ws))
        pts0 = cand[m][None]
    else:
        W = sc.w_pairs()
        iu = np.triu_indices(len(cand), 1)
        for a, b in zip(*iu):
            rows.append((float(cand[a, 0]), float(cand[a, 1]),
                         float(cand[b, 0]), float(cand[b, 1]), float(W[a, b])))
        flat = np.where(np.isfinite(W[iu]), W[iu], np.inf)
        m = int(np.argmin(flat))
        pts0 = np.stack([cand[iu[0][m]], cand[iu[1][m]]])
    best, bw, final_step = _refine(pts0, bdata, grid, cell, refine_levels, margin)
    return ScanResult(rows=rows, config=Configuration(best), W=bw, cell=cell,
                      refined_cell=final_step)


def _multistart(k: int, bdata: BoundaryData, grid: Grid, margin: float,
                seed: int = 0):
    """Nelder-Mead from symmetric ring starts (k >= 3)."""
    cx, cy = grid.shape.center
    big = 1e8

    def objective(x):
        pts = x.reshape(-1, 2)
        pen = 0.0
        for i in range(k):
            for j in range(i + 1, k):
                d = np.hypot(*(pts[i] - pts[j]))
                if d <= 4.0 * grid.h:
                    pen += 4.0 * grid.h - d + 1.0
        if not _boundary_margin_ok(grid, pts, margin):
            pen += 1.0
        if pen > 0:
            return big * (1.0 + pen)
        return renormalized_W(pts, bdata, grid)

    starts = []
    for frac in (0.3, 0.45, 0.6):
        for rot in (0.0, np.pi / k):
            ang = 2.0 * np.pi * np.arange(k) / k + rot
            rad = frac * grid.shape.radial_profile(ang)
            starts.append(np.stack([cx + rad * np.cos(ang),
                                    cy + rad * np.sin(ang)], axis=1))
    rng = np.random.default_rng(seed)
    for _ in range(2):
        starts.append(np.stack([
            cx + rng.uniform(-0.3, 0.3, k) * grid.shape.min_feature(),
            cy + rng.uniform(-0.3, 0.3, k) * grid.shape.min_feature()], axis=1))

    best, bw = None, np.inf
    for s0 in starts:
        res = sopt.minimize(objective, s0.ravel(), method="Nelder-Mead",
                            options={"maxiter": 400 * k, "xatol": 0.25 * grid.h,
                                     "fatol": 1e-8, "adaptive": True})
        if res.fun < bw:
            best, bw = res.x.reshape(-1, 2), float(res.fun)
    return Configuration(best), bw


def argmin_W(k: int, bdata: BoundaryData, grid: Grid, search: str = "auto",
             scan: int = 16, workers: int | None = None,
             seed: int = 0) -> tuple[Configuration, float]:
    """Best-found minimizer of W over k-point configurations."""
    if k < 1:
        raise ValueError("argmin search needs k >= 1")
    if search == "auto":
        search = "grid-scan" if k <= 2 else "multistart"
    if search == "grid-scan":
        res = scan_W(bdata, grid, k=k, scan=scan, workers=workers)
        return res.config, res.W
    if search == "multistart":
        margin = max(6.0 * grid.h, 0.05 * grid.shape.min_feature())
        return _multistart(k, bdata, grid, margin, seed)
    raise ValueError(f"unknown search mode {search!r}")


# ----------------------------------------------------------------------------
# Cell problem


@dataclass(frozen=True)
class CellProblemResult:
    taus: tuple
    L_values: tuple
    gamma: float
    coeff: float
    exponent: float
    fit_residual: float
    beta: float
    resolution: float

    def rows(self):
        return list(zip(self.taus, self.L_values))


def cell_problem_L(taus, params: en.ModelParams, resolution: float = 64,
                   beta: float = 0.0, max_iter: int = 4000,
                   seed: int = 0) -> CellProblemResult:
    """Single-core energy on the unit disk with the log divergence removed.

    For each tau (descending, warm-started) minimizes the energy with
    coherence length tau and degree-1 well data rotated by beta, then adds
    (2 L1 + L2 + L3)(s^2/4) pi ln(tau).  The tau -> 0 limit gamma is
    extrapolated by fitting gamma + c tau^q with the rate q free.
    """
    taus = tuple(sorted((float(t) for t in taus), reverse=True))
    if not taus or taus[0] > 0.5 or taus[-1] <= 0:
        raise ValueError("tau ladder must lie in (0, 0.5]")
    grid = build_grid(Disk(1.0), resolution)
    bdata = make_boundary_data(grid, params.s, 1, offset=beta)
    fld = init_field(grid, bdata, "product-ansatz",
                     points=np.zeros((1, 2)), eps=taus[0], seed=seed)
    sched = SolveSchedule(taus, max_iter=max_iter)
    _, report = minimize(fld, params, sched)
    pref = (2.0 * params.L1 + params.L2 + params.L3) * params.s**2 / 4.0
    Ls = tuple(float(r.energy.total + pref * np.pi * np.log(r.eps))
               for r in report.rungs)

    def model(t, gamma, c, q):
        return gamma + c * np.power(t, q)

    t = np.asarray(taus)
    y = np.asarray(Ls)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sopt.OptimizeWarning)
            popt, _ = sopt.curve_fit(
                model, t, y, p0=(y[-1], max(y[0] - y[-1], 1e-3), 1.0),
                bounds=([-np.inf, 0.0, 0.05], [np.inf, np.inf, 5.0]),
                maxfev=20000)
        gamma, c, q = (float(v) for v in popt)
        resid = float(np.sqrt(np.mean((model(t, *popt) - y) ** 2)))
    except RuntimeError:
        gamma, c, q = float(y[-1]), 0.0, 1.0
        resid = float("inf")
    return CellProblemResult(taus=taus, L_values=Ls, gamma=gamma, coeff=c,
                             exponent=q, fit_residual=resid, beta=beta,
                             resolution=float(resolution))


def export_wmap_csv(res: ScanResult, path) -> None:
    ncol = len(res.rows[0]) if res.rows else 3
    header = "x,y,W\n" if ncol == 3 else "x1,y1,x2,y2,W\n"
    with open(path, "w") as f:
        f.write(header)
        for row in res.rows:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def export_cell_csv(res: CellProblemResult, path) -> None:
    with open(path, "w") as f:
        f.write("tau,L\n")
        for tau, L in res.rows():
            f.write(f"{float(tau)!r},{float(L)!r}\n")
