"""Energy densities, discrete totals, and their exact first variations.

The elastic density of the thin-film tensor model is a positive quadratic in
the six gradient components (p1x, p1y, p2x, p2y, rx, ry).  It is implemented
twice: a "mixed" form that displays the cross couplings, and a sum-of-squares
form (one branch per sign of L2+L3) that is pointwise identical and is what
the assembly uses, since it cannot lose positivity to cancellation.

Totals are assembled by bilinear-cell quadrature: gradients are centered
differences at cell midpoints, summed over active cells times h^2 with
area-true weights (grid.cell_weights) on the isotropic part and the bulk,
which removes the O(h) staircase area deficit; the anisotropic cross terms
keep plain unit weights on fully active cells so that the cell sums of
null-Lagrangian densities still telescope exactly to boundary data.  The
bulk potential is sampled at nodes with the matching node weights.
Gradients of the totals are the exact derivatives of these discrete sums
(differentiate-the-discretization), so finite-difference checks close to
roundoff and descent is genuinely monotone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import Grid


class NegativePsqError(ValueError):
    """Raised when a squared modulus argument is negative."""


# ----------------------------------------------------------------------------
# Bulk potentials


@dataclass(frozen=True)
class ClassicBulk:
    """Quartic bulk potential in the invariants (|p|^2, r).

    The constant term is calibrated automatically so the minimum value is
    exactly zero on the well circle |p| = s/2, r = s/3 (and, by the quartic's
    degeneracy, at the second well component (0, -2s/3)).
    """

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.b > 0 and self.c > 0):
            raise ValueError("bulk coefficients need b > 0 and c > 0")
        if not self.a < self.b**2 / (27.0 * self.c):
            raise ValueError("bulk coefficient a too large: a < b^2/(27 c) required")

    @property
    def s(self) -> float:
        return (self.b + math.sqrt(self.b**2 - 24.0 * self.a * self.c)) / (4.0 * self.c)

    @property
    def d(self) -> float:
        s = self.s
        return -((2.0 * self.a / 3.0) * s**2
                 - (4.0 * self.b / 27.0) * s**3
                 + (2.0 * self.c / 9.0) * s**4)

    def value(self, psq, r):
        tr2 = 2.0 * psq + 1.5 * np.square(r)
        detq = psq - 0.25 * np.square(r)
        return self.a * tr2 - 2.0 * self.b * r * detq + 0.5 * self.c * np.square(tr2) + self.d

    def d_dpsq(self, psq, r):
        tr2 = 2.0 * psq + 1.5 * np.square(r)
        return 2.0 * self.a - 2.0 * self.b * r + 2.0 * self.c * tr2

    def d_dr(self, psq, r):
        tr2 = 2.0 * psq + 1.5 * np.square(r)
        return (3.0 * self.a * r - 2.0 * self.b * psq + 1.5 * self.b * np.square(r)
                + 3.0 * self.c * r * tr2)


@dataclass(frozen=True)
class CustomBulk:
    """User-supplied bulk density with its own partials and well constants.

    No automatic differentiation: the caller declares d/d(|p|^2) and d/dr
    along with the well scalar s and the structural constants (delta, m1-m4)
    its analysis depends on.
    """

    density: Callable
    density_dpsq: Callable
    density_dr: Callable
    s: float
    delta: float = 0.0
    m1: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    def value(self, psq, r):
        return self.density(psq, r)

    def d_dpsq(self, psq, r):
        return self.density_dpsq(psq, r)

    def d_dr(self, psq, r):
        return self.density_dr(psq, r)


def g_b0(psq, r, spec: ClassicBulk):
    """Classic bulk density; rejects negative |p|^2 arguments."""
    if np.any(np.asarray(psq) < 0):
        raise NegativePsqError("|p|^2 argument must be nonnegative")
    return spec.value(psq, r)


# ----------------------------------------------------------------------------
# Model parameters


@dataclass(frozen=True)
class ModelParams:
    """Elastic constants, bulk spec, well scalar, and coherence length."""

    L1: float
    L2: float
    L3: float
    bulk: ClassicBulk | CustomBulk
    eps: float
    s: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if not self.L1 > 0:
            raise ValueError("need L1 > 0")
        if not self.L1 + self.L2 + self.L3 > 0:
            raise ValueError("need L1 + L2 + L3 > 0")
        if not self.eps > 0:
            raise ValueError("need eps > 0")
        if self.s is None:
            object.__setattr__(self, "s", float(self.bulk.s))

    @property
    def C(self) -> float:
        return self.L2 + self.L3

    def with_eps(self, eps: float) -> "ModelParams":
        return ModelParams(self.L1, self.L2, self.L3, self.bulk, eps, self.s)


@dataclass(frozen=True)
class GradientSample:
    """One-point gradient data: rows of grad_p are (p1x, p1y), (p2x, p2y)."""

    grad_p: np.ndarray
    grad_r: np.ndarray

    def components(self):
        gp = np.asarray(self.grad_p, dtype=float)
        gr = np.asarray(self.grad_r, dtype=float)
        return gp[0, 0], gp[0, 1], gp[1, 0], gp[1, 1], gr[0], gr[1]


@dataclass(frozen=True)
class EnergyBreakdown:
    elastic: float
    bulk: float

    @property
    def total(self) -> float:
        return self.elastic + self.bulk


# ----------------------------------------------------------------------------
# Pointwise elastic densities


def _mixed_density(L1, C, p1x, p1y, p2x, p2y, rx, ry):
    gp2 = p1x**2 + p1y**2 + p2x**2 + p2y**2
    gr2 = rx**2 + ry**2
    cross = p1x * rx - p1y * ry + rx * p2y + ry * p2x
    jac = p1x * p2y - p1y * p2x
    return ((L1 + 0.5 * C) * gp2 + (0.75 * L1 + 0.125 * C) * gr2
            + 0.5 * C * cross + abs(C) * jac)


def _sos_density_parts(L1, C, p1x, p1y, p2x, p2y, rx, ry):
    """(isotropic, anisotropic) split of the sum-of-squares elastic density.

    The isotropic part L1 (|grad p|^2 + 3/4 |grad r|^2) is shared pointwise
    with the full-tensor form; the remainder carries every L2+L3 coupling.
    The two parts are summed with different quadrature weights.
    """
    gp2 = p1x**2 + p1y**2 + p2x**2 + p2y**2
    gr2 = rx**2 + ry**2
    iso = L1 * (gp2 + 0.75 * gr2)
    if C >= 0:
        A = p1x + 0.5 * rx + p2y
        B = p2x - p1y + 0.5 * ry
        return iso, 0.5 * C * (A * A + B * B)
    A = 0.5 * rx - p1x - p2y
    B = p2x - p1y - 0.5 * ry
    return iso, C * (gp2 + 0.75 * gr2) - 0.5 * C * (A * A + B * B + gr2)


def _sos_density(L1, C, p1x, p1y, p2x, p2y, rx, ry):
    iso, aniso = _sos_density_parts(L1, C, p1x, p1y, p2x, p2y, rx, ry)
    return iso + aniso


def _iso_partials(L1, p1x, p1y, p2x, p2y, rx, ry):
    return (2.0 * L1 * p1x,
            2.0 * L1 * p1y,
            2.0 * L1 * p2x,
            2.0 * L1 * p2y,
            1.5 * L1 * rx,
            1.5 * L1 * ry)


def _aniso_partials(C, p1x, p1y, p2x, p2y, rx, ry):
    """Exact partials of the anisotropic density part (branch by sign of C)."""
    if C >= 0:
        A = p1x + 0.5 * rx + p2y
        B = p2x - p1y + 0.5 * ry
        return (C * A,
                -C * B,
                C * B,
                C * A,
                0.5 * C * A,
                0.5 * C * B)
    A = 0.5 * rx - p1x - p2y
    B = p2x - p1y - 0.5 * ry
    return (C * (2.0 * p1x + A),
            C * (2.0 * p1y + B),
            C * (2.0 * p2x - B),
            C * (2.0 * p2y + A),
            C * (0.5 * rx - 0.5 * A),
            C * (0.5 * ry + 0.5 * B))


def g_e_mixed(grad: GradientSample, params: ModelParams) -> float:
    """Elastic density in the cross-coupling form."""
    return float(_mixed_density(params.L1, params.C, *grad.components()))


def g_e_sos(grad: GradientSample, params: ModelParams) -> float:
    """Elastic density as a sum of squares (branch by sign of L2+L3)."""
    return float(_sos_density(params.L1, params.C, *grad.components()))


# ----------------------------------------------------------------------------
# Discrete assembly


def cell_gradients(u: np.ndarray, h: float):
    """Centered midpoint differences of a nodal array over all cells."""
    ux = (u[1:, :-1] + u[1:, 1:] - u[:-1, :-1] - u[:-1, 1:]) / (2.0 * h)
    uy = (u[:-1, 1:] + u[1:, 1:] - u[:-1, :-1] - u[1:, :-1]) / (2.0 * h)
    return ux, uy


def _scatter_cells(out: np.ndarray, sx: np.ndarray, sy: np.ndarray, h: float):
    """Accumulate d(h^2 sum g)/d(node) given per-cell dg/dux, dg/duy."""
    f = 0.5 * h
    out[:-1, :-1] += f * (-sx - sy)
    out[1:, :-1] += f * (sx - sy)
    out[:-1, 1:] += f * (-sx + sy)
    out[1:, 1:] += f * (sx + sy)


def _pr_cell_grads(grid: Grid, u: np.ndarray):
    p1x, p1y = cell_gradients(u[0], grid.h)
    p2x, p2y = cell_gradients(u[1], grid.h)
    rx, ry = cell_gradients(u[2], grid.h)
    return p1x, p1y, p2x, p2y, rx, ry


def total_G(field, params: ModelParams, area_true: bool = True) -> EnergyBreakdown:
    """Discrete thin-film energy: elastic (sum-of-squares form) + bulk.

    area_true=False drops the cut-cell area weights and sums plain unit
    weights over fully active cells.  That variant is what descent minimizes:
    its Euler-Lagrange operator is the uniform five-point scheme all the way
    to the boundary, so exact nodal samples of a smooth minimizer stay
    discretely critical.  The default reports the same field under the
    area-true quadrature, whose error is O(h^2) instead of O(h).
    """
    grid: Grid = field.grid
    u = field.u
    grads = _pr_cell_grads(grid, u)
    iso, aniso = _sos_density_parts(params.L1, params.C, *grads)
    cw = grid.cell_weights() if area_true else grid.cell_active
    nw = grid.node_weights() if area_true else grid.node_weight
    elastic = float(np.sum(iso * cw)) * grid.h**2
    if params.C != 0.0:
        elastic += float(np.sum(aniso[grid.cell_active])) * grid.h**2
    psq = u[0] ** 2 + u[1] ** 2
    gb = params.bulk.value(psq, u[2])
    bulk = float(np.sum(gb * nw)) * grid.h**2 / params.eps**2
    return EnergyBreakdown(elastic=elastic, bulk=bulk)


def total_F(field, params: ModelParams, area_true: bool = True) -> float:
    """Full-tensor energy with in-plane derivatives only.

    Expands the three elastic contractions of the symmetric traceless tensor
    built from (p, r); differs from total_G by a null-Lagrangian boundary
    term.  Used as the cross-check partner of total_G.
    """
    grid: Grid = field.grid
    u = field.u
    p1x, p1y, p2x, p2y, rx, ry = _pr_cell_grads(grid, u)
    z1x, z1y = p1x + 0.5 * rx, p1y + 0.5 * ry
    z2x, z2y = p2x, p2y
    z3x, z3y = 0.5 * rx - p1x, 0.5 * ry - p1y
    gr2 = rx**2 + ry**2
    term1 = 0.5 * params.L1 * (z1x**2 + z1y**2 + 2.0 * (z2x**2 + z2y**2)
                               + z3x**2 + z3y**2 + gr2)
    term2 = 0.5 * params.L2 * ((z1x + z2y) ** 2 + (z2x + z3y) ** 2)
    term3 = 0.5 * params.L3 * (z1x**2 + 2.0 * z1y * z2x + z2y**2
                               + z2x**2 + 2.0 * z2y * z3x + z3y**2)
    # term1 is pointwise the isotropic part of total_G, so it carries the same
    # quadrature; the L2/L3 terms keep unit weights either way (see total_G).
    cw = grid.cell_weights() if area_true else grid.cell_active
    nw = grid.node_weights() if area_true else grid.node_weight
    elastic = float(np.sum(term1 * cw)) * grid.h**2
    elastic += float(np.sum((term2 + term3)[grid.cell_active])) * grid.h**2
    psq = u[0] ** 2 + u[1] ** 2
    gb = params.bulk.value(psq, u[2])
    bulk = float(np.sum(gb * nw)) * grid.h**2 / params.eps**2
    return elastic + bulk


def gradient_G(field, params: ModelParams, area_true: bool = True) -> np.ndarray:
    """Exact derivative of total_G with respect to interior nodal values.

    Returns a (3, nx, ny) array; boundary and exterior slots are zero.
    area_true must match the total it is paired with.
    """
    grid: Grid = field.grid
    u = field.u
    h = grid.h
    grads = _pr_cell_grads(grid, u)
    cw = grid.cell_weights() if area_true else grid.cell_active.astype(float)
    out = np.zeros_like(u)
    parts = _iso_partials(params.L1, *grads)
    for comp, (sx, sy) in enumerate(zip(parts[0::2], parts[1::2])):
        _scatter_cells(out[comp], cw * sx, cw * sy, h)
    if params.C != 0.0:
        ca = grid.cell_active
        parts = _aniso_partials(params.C, *grads)
        for comp, (sx, sy) in enumerate(zip(parts[0::2], parts[1::2])):
            _scatter_cells(out[comp], np.where(ca, sx, 0.0), np.where(ca, sy, 0.0), h)
    psq = u[0] ** 2 + u[1] ** 2
    gp = params.bulk.d_dpsq(psq, u[2])
    gr = params.bulk.d_dr(psq, u[2])
    nw = grid.node_weights() if area_true else grid.node_weight
    wfac = nw * (h**2 / params.eps**2)
    out[0] += wfac * 2.0 * u[0] * gp
    out[1] += wfac * 2.0 * u[1] * gp
    out[2] += wfac * gr
    out *= grid.interior
    return out


# ----------------------------------------------------------------------------
# Scalar companion models (two-component fields)


def gl_breakdown(field, eps: float, s: float = 2.0,
                 area_true: bool = True) -> EnergyBreakdown:
    grid: Grid = field.grid
    v = (2.0 / s) * field.u
    vx0, vy0 = cell_gradients(v[0], grid.h)
    vx1, vy1 = cell_gradients(v[1], grid.h)
    dens = 0.5 * (vx0**2 + vy0**2 + vx1**2 + vy1**2)
    cw = grid.cell_weights() if area_true else grid.cell_active
    nw = grid.node_weights() if area_true else grid.node_weight
    elastic = float(np.sum(dens * cw)) * grid.h**2
    mod2 = v[0] ** 2 + v[1] ** 2
    gb = 0.25 * (1.0 - mod2) ** 2
    bulk = float(np.sum(gb * nw)) * grid.h**2 / eps**2
    return EnergyBreakdown(elastic=elastic, bulk=bulk)


def total_GL(field, eps: float, s: float = 2.0, area_true: bool = True) -> float:
    """Ginzburg-Landau energy of a two-component field with well radius s/2.

    The field is rescaled by 2/s onto the unit well, so the standard
    normalization (1/2)|grad v|^2 + (1/(4 eps^2))(1-|v|^2)^2 applies.
    """
    return gl_breakdown(field, eps, s, area_true).total


def gradient_GL(field, eps: float, s: float = 2.0,
                area_true: bool = True) -> np.ndarray:
    grid: Grid = field.grid
    scale = 2.0 / s
    v = scale * field.u
    out = np.zeros_like(field.u)
    cw = grid.cell_weights() if area_true else grid.cell_active.astype(float)
    for comp in range(2):
        vx, vy = cell_gradients(v[comp], grid.h)
        _scatter_cells(out[comp], cw * vx, cw * vy, grid.h)
    mod2 = v[0] ** 2 + v[1] ** 2
    nw = grid.node_weights() if area_true else grid.node_weight
    wfac = nw * (grid.h**2 / eps**2)
    out[0] -= wfac * (1.0 - mod2) * v[0]
    out[1] -= wfac * (1.0 - mod2) * v[1]
    out *= scale * grid.interior
    return out


def csh_breakdown(field, eps: float, area_true: bool = True) -> EnergyBreakdown:
    grid: Grid = field.grid
    u = field.u
    ux0, uy0 = cell_gradients(u[0], grid.h)
    ux1, uy1 = cell_gradients(u[1], grid.h)
    dens = 0.5 * (ux0**2 + uy0**2 + ux1**2 + uy1**2)
    cw = grid.cell_weights() if area_true else grid.cell_active
    nw = grid.node_weights() if area_true else grid.node_weight
    elastic = float(np.sum(dens * cw)) * grid.h**2
    mod2 = u[0] ** 2 + u[1] ** 2
    gb = mod2 * (1.0 - mod2) ** 2
    bulk = float(np.sum(gb * nw)) * grid.h**2 / eps**2
    return EnergyBreakdown(elastic=elastic, bulk=bulk)


def total_CSH(field, eps: float, area_true: bool = True) -> float:
    """Self-dual triple-well energy: (1/2)|grad p|^2 + eps^-2 |p|^2(1-|p|^2)^2."""
    return csh_breakdown(field, eps, area_true).total


def gradient_CSH(field, eps: float, area_true: bool = True) -> np.ndarray:
    grid: Grid = field.grid
    u = field.u
    out = np.zeros_like(u)
    cw = grid.cell_weights() if area_true else grid.cell_active.astype(float)
    for comp in range(2):
        ux, uy = cell_gradients(u[comp], grid.h)
        _scatter_cells(out[comp], cw * ux, cw * uy, grid.h)
    mod2 = u[0] ** 2 + u[1] ** 2
    dphi = (1.0 - mod2) * (1.0 - 3.0 * mod2)  # d/dm of m(1-m)^2
    nw = grid.node_weights() if area_true else grid.node_weight
    wfac = nw * (grid.h**2 / eps**2)
    out[0] += wfac * dphi * 2.0 * u[0]
    out[1] += wfac * dphi * 2.0 * u[1]
    out *= grid.interior
    return out
