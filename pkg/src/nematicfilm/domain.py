"""Discretized reference domains and degree-k/2 Dirichlet data.

A shape (disk, ellipse, rounded rectangle) is sampled on a uniform grid and
masked by its level function.  Nodes are classified Exterior / Boundary /
Interior; the free unknowns of every solve are the Interior nodes, and the
Boundary nodes carry pinned data.  A node is Interior only when all four of
its incident cells are fully inside, which keeps every quadrature cell and
every discrete Jacobian seen by an unknown complete.

The boundary nodes form a single closed loop ordered by increasing polar
angle about the shape center (all supported shapes are star-shaped).  Each
boundary node carries the arc-length parameter t in [0,1) of its radial
projection onto the true boundary curve, the analytic outward normal, the
positively-oriented tangent, and a quadrature weight derived from the true
arc length (not from staircase chord lengths, which are biased estimators
of the perimeter).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage

EXTERIOR, BOUNDARY, INTERIOR = 0, 1, 2

_PROFILE_SAMPLES = 4096


class ResolutionTooCoarseError(ValueError):
    """Raised when fewer than 16 nodes span the smallest shape feature."""


class PhaseJumpTooLargeError(ValueError):
    """Raised when a single phase increment along a loop reaches pi/2."""


def wrap_angle(d):
    """Reduce angle differences to the principal branch [-pi, pi)."""
    return np.mod(d + np.pi, 2.0 * np.pi) - np.pi


# ----------------------------------------------------------------------------
# Shapes


class Shape:
    """Base for star-shaped domains given by a level function (< 0 inside)."""

    center: tuple[float, float]
    kind: str

    def level(self, x, y):
        raise NotImplementedError

    def normal(self, x, y):
        raise NotImplementedError

    def min_feature(self) -> float:
        raise NotImplementedError

    def bbox(self) -> tuple[float, float, float, float]:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    # -- boundary curve, parametrized by polar angle about the center -------

    def radial_profile(self, phi):
        """Distance from the center to the boundary along direction phi."""
        cx, cy = self.center
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        lo = np.full(phi.shape, 1e-9)
        hi = np.full(phi.shape, self._radial_upper_bound())
        cph, sph = np.cos(phi), np.sin(phi)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            inside = self.level(cx + mid * cph, cy + mid * sph) < 0.0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return 0.5 * (lo + hi)

    def _radial_upper_bound(self) -> float:
        xmin, xmax, ymin, ymax = self.bbox()
        cx, cy = self.center
        return 2.0 * max(xmax - cx, cx - xmin, ymax - cy, cy - ymin) + 1.0

    def boundary_curve(self):
        """(phi samples, points (n, 2), cumulative arc length, perimeter)."""
        phi = np.linspace(-np.pi, np.pi, _PROFILE_SAMPLES + 1)
        rad = self.radial_profile(phi)
        cx, cy = self.center
        pts = np.stack([cx + rad * np.cos(phi), cy + rad * np.sin(phi)], axis=1)
        seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        return phi, pts, arc, float(arc[-1])


@dataclass(frozen=True)
class Disk(Shape):
    radius: float
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = "disk"

    def level(self, x, y):
        return (x - self.center[0]) ** 2 + (y - self.center[1]) ** 2 - self.radius**2

    def normal(self, x, y):
        dx = x - self.center[0]
        dy = y - self.center[1]
        n = np.hypot(dx, dy)
        n = np.where(n == 0, 1.0, n)
        return dx / n, dy / n

    def min_feature(self) -> float:
        return 2.0 * self.radius

    def bbox(self):
        cx, cy = self.center
        R = self.radius
        return (cx - R, cx + R, cy - R, cy + R)

    def params(self) -> dict:
        return {"radius": self.radius, "center": list(self.center)}


@dataclass(frozen=True)
class Ellipse(Shape):
    a: float
    b: float
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = "ellipse"

    def level(self, x, y):
        return ((x - self.center[0]) / self.a) ** 2 + ((y - self.center[1]) / self.b) ** 2 - 1.0

    def normal(self, x, y):
        gx = (x - self.center[0]) / self.a**2
        gy = (y - self.center[1]) / self.b**2
        n = np.hypot(gx, gy)
        n = np.where(n == 0, 1.0, n)
        return gx / n, gy / n

    def min_feature(self) -> float:
        return 2.0 * min(self.a, self.b)

    def bbox(self):
        cx, cy = self.center
        return (cx - self.a, cx + self.a, cy - self.b, cy + self.b)

    def params(self) -> dict:
        return {"a": self.a, "b": self.b, "center": list(self.center)}


@dataclass(frozen=True)
class RoundedRect(Shape):
    """Axis-aligned rectangle with circular corner fillets (C^1 boundary).

    Sharp corners are refused: the corner radius must be positive.
    """

    width: float
    height: float
    corner_radius: float
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = "rect"

    def __post_init__(self):
        if self.corner_radius <= 0:
            raise ValueError("corner_radius must be positive (sharp corners refused)")
        if self.corner_radius > 0.5 * min(self.width, self.height):
            raise ValueError("corner_radius exceeds half the smaller side")

    def _q(self, x, y):
        qx = np.abs(x - self.center[0]) - (0.5 * self.width - self.corner_radius)
        qy = np.abs(y - self.center[1]) - (0.5 * self.height - self.corner_radius)
        return qx, qy

    def level(self, x, y):
        qx, qy = self._q(x, y)
        outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
        return outside + np.minimum(np.maximum(qx, qy), 0.0) - self.corner_radius

    def normal(self, x, y):
        qx, qy = self._q(x, y)
        sx = np.sign(x - self.center[0])
        sy = np.sign(y - self.center[1])
        sx = np.where(sx == 0, 1.0, sx)
        sy = np.where(sy == 0, 1.0, sy)
        corner = (qx > 0) & (qy > 0)
        n = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
        n = np.where(n == 0, 1.0, n)
        nx = np.where(corner, sx * qx / n, np.where(qx >= qy, sx, 0.0))
        ny = np.where(corner, sy * qy / n, np.where(qx >= qy, 0.0, sy))
        mag = np.hypot(nx, ny)
        mag = np.where(mag == 0, 1.0, mag)
        return nx / mag, ny / mag

    def min_feature(self) -> float:
        return min(self.width, self.height)

    def bbox(self):
        cx, cy = self.center
        return (cx - 0.5 * self.width, cx + 0.5 * self.width,
                cy - 0.5 * self.height, cy + 0.5 * self.height)

    def params(self) -> dict:
        return {"width": self.width, "height": self.height,
                "corner_radius": self.corner_radius, "center": list(self.center)}


# ----------------------------------------------------------------------------
# Grid

# Neighbour search order when a cut cell hands its clipped area to a fully
# active cell: nearest first, ties broken lexicographically for determinism.
_ABSORB_OFFSETS = tuple(
    sorted(
        ((di, dj) for di in range(-2, 3) for dj in range(-2, 3) if (di, dj) != (0, 0)),
        key=lambda o: (o[0] * o[0] + o[1] * o[1], o[0], o[1]),
    )
)


def _negative_fraction(l00, l10, l11, l01) -> float:
    """Fraction of a cell where the level (linear along edges) is negative.

    Walks the cell perimeter, keeping corners with negative level and the
    sign-change points on edges, and returns the shoelace area of that
    polygon.  Exact for an affine level; for a smooth boundary the error is
    the chord-vs-arc sliver, O(h^3 * curvature) per cell.
    """
    corners = (
        (0.0, 0.0, l00),
        (1.0, 0.0, l10),
        (1.0, 1.0, l11),
        (0.0, 1.0, l01),
    )
    verts = []
    for a in range(4):
        x0, y0, la = corners[a]
        x1, y1, lb = corners[(a + 1) % 4]
        if la < 0.0:
            verts.append((x0, y0))
        if (la < 0.0) != (lb < 0.0):
            f = la / (la - lb)
            verts.append((x0 + f * (x1 - x0), y0 + f * (y1 - y0)))
    if len(verts) < 3:
        return 0.0
    area = 0.0
    for a, (xa, ya) in enumerate(verts):
        xb, yb = verts[(a + 1) % len(verts)]
        area += xa * yb - xb * ya
    return 0.5 * area


@dataclass(eq=False)
class Grid:
    """Masked uniform grid with an ordered boundary loop.

    Node arrays are indexed [ix, iy].  ``mask`` holds EXTERIOR/BOUNDARY/
    INTERIOR codes; ``bloop`` lists boundary nodes in positive orientation
    starting at the node whose projection is nearest boundary parameter 0.
    """

    shape: Shape
    resolution: float
    h: float
    xs: np.ndarray
    ys: np.ndarray
    mask: np.ndarray
    cell_active: np.ndarray
    node_weight: np.ndarray         # quadrature weight: incident active cells / 4
    stencil_ok: np.ndarray          # nodes whose full 3x3 neighborhood is active
    bloop: np.ndarray               # (nb, 2) int indices in loop order
    bpos: np.ndarray                # (nb, 2) node coordinates
    bt: np.ndarray                  # (nb,) arc parameter in [0, 1)
    bnormal: np.ndarray             # (nb, 2) outward unit normal
    btangent: np.ndarray            # (nb, 2) positively oriented tangent
    bweight: np.ndarray             # (nb,) true arc-length quadrature weight
    perimeter: float
    curve_xy: np.ndarray            # dense true-boundary polyline samples
    arc_table: tuple = ()           # (phi samples, cumulative arc, t0) for arc_param
    _lap: spla.SuperLU | None = field(default=None, repr=False)
    _stencil: tuple | None = field(default=None, repr=False)
    _interior_index: np.ndarray | None = field(default=None, repr=False)
    _cweights: np.ndarray | None = field(default=None, repr=False)
    _nweights: np.ndarray | None = field(default=None, repr=False)

    # -- convenience -------------------------------------------------------

    @property
    def nx(self) -> int:
        return self.xs.size

    @property
    def ny(self) -> int:
        return self.ys.size

    @property
    def active(self) -> np.ndarray:
        return self.mask != EXTERIOR

    @property
    def interior(self) -> np.ndarray:
        return self.mask == INTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return self.mask == BOUNDARY

    @property
    def node_x(self) -> np.ndarray:
        return np.broadcast_to(self.xs[:, None], (self.nx, self.ny))

    @property
    def node_y(self) -> np.ndarray:
        return np.broadcast_to(self.ys[None, :], (self.nx, self.ny))

    def cell_area(self) -> float:
        return float(self.cell_active.sum()) * self.h * self.h

    def cell_weights(self) -> np.ndarray:
        """Area-true quadrature weights per cell.

        Fully active cells get weight 1; the clipped area of each partially
        covered boundary cell (whose corner values are not all defined, so it
        cannot carry a density of its own) is absorbed into the nearest fully
        active cell.  The weighted cell sum then reproduces the domain area up
        to the curvature of the boundary inside single cells, which removes
        the O(h) staircase deficit from energy totals.
        """
        if self._cweights is None:
            lev = self.shape.level(self.xs[:, None], self.ys[None, :])
            neg = lev < 0.0
            ca = self.cell_active
            any4 = neg[:-1, :-1] | neg[1:, :-1] | neg[:-1, 1:] | neg[1:, 1:]
            w = ca.astype(float)
            ncx, ncy = ca.shape
            for i, j in np.argwhere(any4 & ~ca):
                f = _negative_fraction(
                    lev[i, j], lev[i + 1, j], lev[i + 1, j + 1], lev[i, j + 1]
                )
                if f <= 0.0:
                    continue
                for di, dj in _ABSORB_OFFSETS:
                    ii, jj = i + di, j + dj
                    if 0 <= ii < ncx and 0 <= jj < ncy and ca[ii, jj]:
                        w[ii, jj] += f
                        break
            self._cweights = w
        return self._cweights

    def node_weights(self) -> np.ndarray:
        """Node quadrature weights consistent with cell_weights(): each node
        takes a quarter of every incident cell's weight, so nodal sums also
        integrate to the domain area."""
        if self._nweights is None:
            w = self.cell_weights()
            acc = np.zeros((self.nx, self.ny))
            acc[:-1, :-1] += w
            acc[1:, :-1] += w
            acc[:-1, 1:] += w
            acc[1:, 1:] += w
            self._nweights = acc / 4.0
        return self._nweights

    # -- masked 5-point Laplace solve --------------------------------------

    def interior_stencil(self):
        """Five-point matrix (4 on diagonal, -1 to interior neighbours) over
        interior nodes, with the row/col node coordinates.

        Dirichlet data enters through the right-hand side, so the same matrix
        serves both the harmonic extension and descent preconditioning.
        Returns (A, ii, jj) where A is csc and (ii, jj) index the rows.
        """
        if self._stencil is not None:
            return self._stencil
        interior = self.interior
        idx = -np.ones(self.mask.shape, dtype=np.int64)
        ii, jj = np.nonzero(interior)
        n = ii.size
        idx[ii, jj] = np.arange(n)
        rows, cols, vals = [], [], []
        rows.append(np.arange(n))
        cols.append(np.arange(n))
        vals.append(np.full(n, 4.0))
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = ii + di, jj + dj
            nbr = idx[ni, nj]
            has = nbr >= 0
            rows.append(np.arange(n)[has])
            cols.append(nbr[has])
            vals.append(np.full(int(has.sum()), -1.0))
        A = sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
        self._stencil = (A, ii, jj)
        self._interior_index = idx
        return self._stencil

    def _laplace_factor(self):
        if self._lap is None:
            A, _, _ = self.interior_stencil()
            self._lap = spla.splu(A)
        return self._lap

    def solve_laplace(self, boundary_values: np.ndarray) -> np.ndarray:
        """Discrete harmonic extension of per-boundary-node values.

        Returns a full nodal array (exterior nodes zero).  The direct solve
        leaves a residual at roundoff, checked against 1e-10.
        """
        lu = self._laplace_factor()
        idx = self._interior_index
        bgrid = np.zeros(self.mask.shape)
        bgrid[self.bloop[:, 0], self.bloop[:, 1]] = boundary_values
        ii, jj = np.nonzero(self.interior)
        rhs = np.zeros(ii.size)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = ii + di, jj + dj
            on_b = self.mask[ni, nj] == BOUNDARY
            rhs[on_b] += bgrid[ni[on_b], nj[on_b]]
        sol = lu.solve(rhs)
        out = bgrid
        out[ii, jj] = sol
        # defensive residual check on the linear system
        res = 4.0 * sol - rhs
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = ii + di, jj + dj
            nbr = idx[ni, nj]
            has = nbr >= 0
            res[has] -= sol[nbr[has]]
        scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
        if np.abs(res).max(initial=0.0) > 1e-10 * scale:
            raise RuntimeError("Laplace solve residual above 1e-10")
        return out


def arc_param(grid: Grid, x, y) -> np.ndarray:
    """Arc parameter t in [0, 1) of the radial boundary projection of (x, y).

    Uses the same anchoring as the grid's boundary loop, so boundary data
    evaluated at arc_param of a boundary node reproduces the pinned trace.
    """
    phi_s, arc_s, t0 = grid.arc_table
    cx, cy = grid.shape.center
    phi = np.arctan2(np.asarray(y) - cy, np.asarray(x) - cx)
    per = grid.perimeter
    return np.mod(np.interp(phi, phi_s, arc_s) / per - t0, 1.0)


def bilinear_sample(grid: Grid, u: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of nodal values at points (n, 2)."""
    pts = np.atleast_2d(pts)
    fx = np.clip((pts[:, 0] - grid.xs[0]) / grid.h, 0.0, grid.nx - 1.001)
    fy = np.clip((pts[:, 1] - grid.ys[0]) / grid.h, 0.0, grid.ny - 1.001)
    i = fx.astype(int)
    j = fy.astype(int)
    ax = fx - i
    ay = fy - j
    return ((1 - ax) * (1 - ay) * u[i, j]
            + ax * (1 - ay) * u[i + 1, j]
            + (1 - ax) * ay * u[i, j + 1]
            + ax * ay * u[i + 1, j + 1])


def padded_with_trace(grid: Grid, u: np.ndarray, bdata) -> np.ndarray:
    """Copy of component arrays with a trace-valued halo outside the mask.

    Exterior nodes within two steps of the active set get the Dirichlet data
    of their radial boundary projection, so bilinear stencils evaluated just
    inside the boundary never blend in exterior zeros.  ``u`` is (3, nx, ny).
    """
    active = grid.active
    halo = ndimage.binary_dilation(
        active, structure=np.ones((3, 3), bool), iterations=2
    ) & ~active
    hi, hj = np.nonzero(halo)
    t = arc_param(grid, grid.xs[hi], grid.ys[hj])
    p1, p2, r = bdata.values_at(t)
    upad = u.copy()
    upad[0, hi, hj] = p1
    upad[1, hi, hj] = p2
    upad[2, hi, hj] = r
    return upad


def build_grid(shape: Shape, resolution: float) -> Grid:
    """Sample a shape on a uniform grid with spacing 1/resolution."""
    if shape.min_feature() * resolution < 16:
        raise ResolutionTooCoarseError(
            f"{shape.min_feature() * resolution:.1f} nodes across the smallest "
            f"feature; need at least 16"
        )
    h = 1.0 / float(resolution)
    cx, cy = shape.center
    xmin, xmax, ymin, ymax = shape.bbox()
    # lattice through the center so symmetric shapes get symmetric masks
    i0 = int(math.ceil((cx - xmin) / h)) + 2
    j0 = int(math.ceil((cy - ymin) / h)) + 2
    nx = i0 + int(math.ceil((xmax - cx) / h)) + 3
    ny = j0 + int(math.ceil((ymax - cy) / h)) + 3
    xs = cx + (np.arange(nx) - i0) * h
    ys = cy + (np.arange(ny) - j0) * h

    lev = shape.level(xs[:, None], ys[None, :])
    active = lev < 0.0
    if active[0].any() or active[-1].any() or active[:, 0].any() or active[:, -1].any():
        raise RuntimeError("active nodes reached the array margin")

    ca = active[:-1, :-1] & active[1:, :-1] & active[:-1, 1:] & active[1:, 1:]
    cnt = np.zeros((nx, ny), dtype=np.int8)
    cnt[:-1, :-1] += ca
    cnt[1:, :-1] += ca
    cnt[:-1, 1:] += ca
    cnt[1:, 1:] += ca
    interior = active & (cnt == 4)
    boundary = active & ~interior
    if not interior.any():
        raise ResolutionTooCoarseError("no interior nodes at this resolution")
    mask = np.zeros((nx, ny), dtype=np.int8)
    mask[boundary] = BOUNDARY
    mask[interior] = INTERIOR

    stencil_ok = active.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            shifted = np.zeros_like(active)
            src_i = slice(max(0, -di), nx - max(0, di))
            dst_i = slice(max(0, di), nx - max(0, -di))
            src_j = slice(max(0, -dj), ny - max(0, dj))
            dst_j = slice(max(0, dj), ny - max(0, -dj))
            shifted[dst_i, dst_j] = active[src_i, src_j]
            stencil_ok &= shifted

    # boundary loop ordered by polar angle about the center
    bi, bj = np.nonzero(boundary)
    bx = xs[bi]
    by = ys[bj]
    phi = np.arctan2(by - cy, bx - cx)
    rad = np.hypot(bx - cx, by - cy)
    order = np.lexsort((rad, phi))
    bi, bj, bx, by, phi = bi[order], bj[order], bx[order], by[order], phi[order]

    phi_s, curve_xy, arc_s, perim = shape.boundary_curve()
    # arc parameter anchored so t = 0 at the true boundary point at angle 0
    t0 = np.interp(0.0, phi_s, arc_s) / perim
    t = np.mod(np.interp(phi, phi_s, arc_s) / perim - t0, 1.0)
    start = int(np.argmin(np.abs(wrap_angle(phi))))
    bi, bj, bx, by, t = (np.roll(a, -start, axis=0) for a in (bi, bj, bx, by, t))

    nvx, nvy = shape.normal(bx, by)
    tvx, tvy = -nvy, nvx
    dt = np.mod(np.diff(t, append=t[0] + 1.0), 1.0)
    dt_prev = np.roll(dt, 1)
    bweight = perim * 0.5 * (dt + dt_prev)

    grid = Grid(
        shape=shape,
        resolution=float(resolution),
        h=h,
        xs=xs,
        ys=ys,
        mask=mask,
        cell_active=ca,
        node_weight=cnt.astype(float) / 4.0,
        stencil_ok=stencil_ok,
        bloop=np.stack([bi, bj], axis=1),
        bpos=np.stack([bx, by], axis=1),
        bt=t,
        bnormal=np.stack([nvx, nvy], axis=1),
        btangent=np.stack([tvx, tvy], axis=1),
        bweight=bweight,
        perimeter=perim,
        curve_xy=curve_xy,
        arc_table=(phi_s, arc_s, t0),
    )
    return grid


# ----------------------------------------------------------------------------
# Boundary data


@dataclass(frozen=True)
class BoundaryData:
    """Uniaxial Dirichlet trace with winding k.

    p0(t) = (s/2) (cos 2a(t), sin 2a(t)) with a(t) = pi k t + offset/2 along
    the boundary arc parameter, and r0 = s/3 everywhere, so the trace sits on
    the bulk well and the tensor trace has degree k/2.
    """

    p0: np.ndarray        # (nb, 2)
    r0: float
    s: float
    k: int
    offset: float

    def phases(self) -> np.ndarray:
        return np.arctan2(self.p0[:, 1], self.p0[:, 0])

    def values_at(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Evaluate the trace formula (p1, p2, r) at arbitrary arc parameters."""
        phase = 2.0 * np.pi * self.k * np.asarray(t, dtype=float) + self.offset
        p1 = 0.5 * self.s * np.cos(phase)
        p2 = 0.5 * self.s * np.sin(phase)
        return p1, p2, np.full_like(p1, self.r0)


def make_boundary_data(grid: Grid, s: float, k: int, offset: float = 0.0) -> BoundaryData:
    """Degree-k/2 well data along the boundary loop.  k = 0 gives the
    constant trace used by trivial-well tests."""
    if k < 0 or k != int(k):
        raise ValueError("winding k must be a nonnegative integer")
    if s == 0:
        raise ValueError("well scalar s must be nonzero")
    phase = 2.0 * np.pi * k * grid.bt + offset
    p0 = 0.5 * s * np.stack([np.cos(phase), np.sin(phase)], axis=1)
    return BoundaryData(p0=p0, r0=s / 3.0, s=float(s), k=int(k), offset=float(offset))


def boundary_degree(trace: BoundaryData) -> int:
    """Winding of p0 along the loop from principal-branch phase increments."""
    mod = np.hypot(trace.p0[:, 0], trace.p0[:, 1])
    if mod.min() < 0.25 * abs(trace.s):
        raise ValueError("|p0| falls below |s|/4 on the loop")
    ph = trace.phases()
    inc = wrap_angle(np.diff(ph, append=ph[0]))
    if np.abs(inc).max() >= 0.5 * np.pi:
        raise PhaseJumpTooLargeError(
            f"max phase increment {np.abs(inc).max():.3f} >= pi/2; loop too coarse"
        )
    total = inc.sum() / (2.0 * np.pi)
    k = round(float(total))
    if abs(total - k) > 1e-6:
        raise PhaseJumpTooLargeError(f"winding {total} not close to an integer")
    return int(k)


def export_grid_csv(grid: Grid, path) -> None:
    """Write (x, y, mask) rows for every node, x index outer."""
    with open(path, "w") as f:
        f.write("x,y,mask\n")
        for i in range(grid.nx):
            x = float(grid.xs[i])
            for j in range(grid.ny):
                f.write(f"{x!r},{float(grid.ys[j])!r},{int(grid.mask[i, j])}\n")
