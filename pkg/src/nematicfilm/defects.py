"""Defect location, winding classification, and well-convergence metrics.

A defect is a connected component of the sublevel set {|p| < (1-mu)|s|/2}
that does not touch the domain boundary.  Its position is the |p|-argmin of
the component with subpixel quadratic refinement; its winding is measured on
an inflated bounding-box ring around the component.  The total charge must
add up to the boundary degree — a mismatch means the field is unconverged
or under-resolved and is raised, not silently reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .domain import BOUNDARY, Grid, PhaseJumpTooLargeError, wrap_angle


class ChargeMismatchError(RuntimeError):
    """Sum of defect windings does not match the boundary degree."""


_EIGHT = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class DefectRecord:
    position: tuple
    winding: int
    core_radius: float
    min_pnorm: float
    node: tuple

    @property
    def q_degree(self) -> float:
        return 0.5 * self.winding


@dataclass(frozen=True)
class DefectSet:
    records: tuple
    mu: float
    rho: float
    warnings: tuple = ()

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def charge(self) -> int:
        return sum(rec.winding for rec in self.records)

    @property
    def positions(self) -> np.ndarray:
        return np.array([rec.position for rec in self.records]).reshape(-1, 2)


def _field_scales(field):
    """Well scalar and boundary degree for tensor or two-component fields."""
    bdata = getattr(field, "bdata", None)
    if bdata is not None:
        return bdata.s, bdata.k
    # two-component field on the unit well: |u| -> 1 plays the role of s/2
    bv = field.bvals
    ph = np.arctan2(bv[:, 1], bv[:, 0])
    inc = wrap_angle(np.diff(ph, append=ph[0]))
    return 2.0, int(round(float(inc.sum() / (2.0 * np.pi))))


def _modulus(field) -> np.ndarray:
    return np.hypot(field.u[0], field.u[1])


def winding_on_loop(field, loop) -> int:
    """Winding of the in-plane components along a closed node cycle.

    loop: (m, 2) integer node indices, in order, first node not repeated.
    """
    loop = np.asarray(loop)
    s, _ = _field_scales(field)
    ii, jj = loop[:, 0], loop[:, 1]
    a = field.u[0, ii, jj]
    b = field.u[1, ii, jj]
    mod = np.hypot(a, b)
    if mod.min() < 0.25 * abs(s):
        raise PhaseJumpTooLargeError("loop passes through a defect core (|p| < |s|/4)")
    ph = np.arctan2(b, a)
    inc = wrap_angle(np.diff(ph, append=ph[0]))
    if np.abs(inc).max() >= 0.5 * np.pi:
        raise PhaseJumpTooLargeError("phase increment >= pi/2 on loop")
    total = float(inc.sum() / (2.0 * np.pi))
    k = round(total)
    if abs(total - k) > 1e-6:
        raise PhaseJumpTooLargeError(f"winding {total} is not an integer")
    return int(k)


def _ring(i0, i1, j0, j1):
    """Counterclockwise rectangle cycle through the four index corners."""
    top = [(i, j0) for i in range(i0, i1)]
    right = [(i1, j) for j in range(j0, j1)]
    bottom = [(i, j1) for i in range(i1, i0, -1)]
    left = [(i0, j) for j in range(j1, j0, -1)]
    return np.array(top + right + bottom + left)


def _subpixel(pn: np.ndarray, i: int, j: int, h: float):
    """Quadratic-fit offset of the |p| minimum inside its grid cell."""
    f = pn[i - 1:i + 2, j - 1:j + 2]
    if f.shape != (3, 3):
        return 0.0, 0.0
    dx = 0.5 * (f[2, 1] - f[0, 1])
    dy = 0.5 * (f[1, 2] - f[1, 0])
    dxx = f[2, 1] - 2.0 * f[1, 1] + f[0, 1]
    dyy = f[1, 2] - 2.0 * f[1, 1] + f[1, 0]
    dxy = 0.25 * (f[2, 2] + f[0, 0] - f[2, 0] - f[0, 2])
    det = dxx * dyy - dxy * dxy
    if det <= 0 or dxx <= 0:
        return 0.0, 0.0
    ox = -(dyy * dx - dxy * dy) / det
    oy = -(dxx * dy - dxy * dx) / det
    if abs(ox) > 0.5 or abs(oy) > 0.5:
        return 0.0, 0.0
    return ox * h, oy * h


def _winding_around(field, grid: Grid, i0, i1, j0, j1):
    """Winding on an inflating ring, retrying if a core sits on the ring."""
    for margin in (2, 3, 4, 5):
        a0 = max(i0 - margin, 0)
        a1 = min(i1 + margin, grid.nx - 1)
        b0 = max(j0 - margin, 0)
        b1 = min(j1 + margin, grid.ny - 1)
        loop = _ring(a0, a1, b0, b1)
        if not grid.active[loop[:, 0], loop[:, 1]].all():
            raise PhaseJumpTooLargeError("winding ring leaves the domain")
        try:
            return winding_on_loop(field, loop)
        except PhaseJumpTooLargeError:
            if margin == 5:
                raise
    raise AssertionError("unreachable")


def detect_defects(field, mu: float = 0.5) -> DefectSet:
    """Locate defects of a converged field via the |p| sublevel set."""
    grid: Grid = field.grid
    s, k = _field_scales(field)
    pn = _modulus(field)
    sub = grid.active & (pn < (1.0 - mu) * 0.5 * abs(s))
    labels, ncomp = ndimage.label(sub, structure=_EIGHT)
    reclabels, _ = ndimage.label(grid.active & (pn < 0.45 * abs(s)), structure=_EIGHT)

    records = []
    warnings = []
    for comp in range(1, ncomp + 1):
        nodes = np.nonzero(labels == comp)
        if (grid.mask[nodes] == BOUNDARY).any():
            warnings.append(
                f"component of {nodes[0].size} nodes touches the boundary; skipped")
            continue
        sel = np.argmin(pn[nodes])
        ci, cj = int(nodes[0][sel]), int(nodes[1][sel])
        ox, oy = _subpixel(pn, ci, cj, grid.h)
        pos = (float(grid.xs[ci] + ox), float(grid.ys[cj] + oy))
        w = _winding_around(field, grid, nodes[0].min(), nodes[0].max(),
                            nodes[1].min(), nodes[1].max())
        # core radius: reach of the 0.9 (s/2) recovery region around this core
        rid = reclabels[ci, cj]
        if rid > 0:
            rn = np.nonzero(reclabels == rid)
            dist = np.hypot(grid.xs[rn[0]] - pos[0], grid.ys[rn[1]] - pos[1])
            core = float(max(dist.max(), grid.h))
        else:
            core = grid.h
        records.append(DefectRecord(position=pos, winding=w, core_radius=core,
                                    min_pnorm=float(pn[ci, cj]), node=(ci, cj)))

    records.sort(key=lambda rec: (rec.position[0], rec.position[1]))
    rho = 4.0 * max((rec.core_radius for rec in records), default=grid.h)
    found = DefectSet(records=tuple(records), mu=mu, rho=rho, warnings=tuple(warnings))
    if found.charge != k:
        raise ChargeMismatchError(
            f"defect windings sum to {found.charge}, boundary degree is {k} "
            f"({len(records)} defects, {len(warnings)} boundary warnings)")
    return found


@dataclass(frozen=True)
class WellMetrics:
    sup_p: float               # sup over Omega_rho of ||p| - |s|/2|
    sup_r: float               # sup over Omega_rho of |r - s/3|
    bad_area: dict             # mu -> area of {dist to wells > mu}
    eps: float
    rho: float

    def bad_over_eps2(self, mu: float) -> float:
        return self.bad_area[mu] / self.eps**2


def _well_distance(field, s: float) -> np.ndarray:
    """Euclidean distance of (|p|, r) to the nearer bulk-well component."""
    pn = _modulus(field)
    r = field.u[2]
    d_circle = np.hypot(pn - 0.5 * abs(s), r - s / 3.0)
    d_point = np.hypot(pn, r + 2.0 * s / 3.0)
    return np.minimum(d_circle, d_point)


def omega_rho_mask(grid: Grid, positions: np.ndarray, rho: float) -> np.ndarray:
    """Active nodes at distance >= rho from every given defect position."""
    keep = grid.active.copy()
    for bx, by in np.asarray(positions).reshape(-1, 2):
        keep &= np.hypot(grid.node_x - bx, grid.node_y - by) >= rho
    return keep


def well_metrics(field, defects: DefectSet, eps: float,
                 rho: float | None = None, mus=(0.05, 0.1, 0.2)) -> WellMetrics:
    """Convergence-to-well observables away from the defect cores."""
    grid: Grid = field.grid
    s, _ = _field_scales(field)
    if rho is None:
        rho = defects.rho
    keep = omega_rho_mask(grid, defects.positions, rho)
    pn = _modulus(field)
    sup_p = float(np.abs(pn - 0.5 * abs(s))[keep].max()) if keep.any() else 0.0
    if field.u.shape[0] > 2:
        sup_r = float(np.abs(field.u[2] - s / 3.0)[keep].max()) if keep.any() else 0.0
        wd = _well_distance(field, s)
    else:
        sup_r = 0.0
        wd = np.abs(pn - 1.0)
    bad = {float(mu): float((grid.active & (wd > mu)).sum()) * grid.h**2 for mu in mus}
    return WellMetrics(sup_p=sup_p, sup_r=sup_r, bad_area=bad, eps=eps, rho=rho)


def director_angles(field, defects: DefectSet | None = None,
                    rho: float = 0.0) -> np.ndarray:
    """Per-node line-field angle in [0, pi); NaN off the domain or near cores."""
    grid: Grid = field.grid
    keep = grid.active if defects is None or rho <= 0 else \
        omega_rho_mask(grid, defects.positions, rho)
    ang = 0.5 * np.arctan2(field.u[1], field.u[0])
    ang = np.mod(ang, np.pi)
    out = np.where(keep, ang, np.nan)
    return out


def export_defect_csv(defects: DefectSet, path) -> None:
    with open(path, "w") as f:
        f.write("x,y,winding,core_radius\n")
        for rec in defects.records:
            f.write(f"{float(rec.position[0])!r},{float(rec.position[1])!r},"
                    f"{int(rec.winding)},{float(rec.core_radius)!r}\n")


def export_director_csv(field, path, defects: DefectSet | None = None,
                        rho: float = 0.0) -> None:
    grid: Grid = field.grid
    ang = director_angles(field, defects, rho)
    pn = _modulus(field)
    r = field.u[2] if field.u.shape[0] > 2 else np.zeros_like(pn)
    with open(path, "w") as f:
        f.write("x,y,angle,pnorm,r\n")
        for i in range(grid.nx):
            for j in range(grid.ny):
                if grid.mask[i, j] == 0:
                    continue
                f.write(f"{float(grid.xs[i])!r},{float(grid.ys[j])!r},"
                        f"{float(ang[i, j])!r},{float(pn[i, j])!r},"
                        f"{float(r[i, j])!r}\n")
