"""Certified checks on solved fields.

Four independent instruments, all second opinions on quantities the solver
already tracks: a boundary-flux identity on disk domains, a monitor for the
eps^-2-weighted bulk integral along a continuation ladder, least-squares
fits of energy against ln(1/eps), and the closed-form offset between the
planar (p, r) energy and the full tensor energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from .domain import Disk, bilinear_sample, padded_with_trace
from .energy import ModelParams, total_F, total_G


class NotADiskError(ValueError):
    """The boundary-flux identity is only derived for disk domains."""


class InsufficientSamplesError(ValueError):
    """Too few samples, or too narrow an eps span, for an asymptotic fit."""


# ----------------------------------------------------------------------------
# Boundary-flux (virial) identity on the disk


@dataclass(frozen=True)
class PohozaevReport:
    """Terms of the disk virial identity, each computed by quadrature.

    The identity for critical points on a disk of radius R reads

        0 = R (L1 + C/2) oint (|p_nu|^2 - |p_tau|^2)
          + R (3 L1/4 + C/8) oint |r_nu|^2
          + 2 eps^-2 int g_b
          + (C/2) R oint r_nu (cos 2t, sin 2t) . p_nu,          C = L2 + L3,

    using that r is constant along the boundary.  ``residual`` is the sum of
    the four groups; it vanishes for an exact critical point and decays with
    grid refinement for a discrete one.  The derived inequality bounds the
    bulk term by the tangential boundary flux of the pinned data.
    """

    radius: float
    flux_p_nu: float        # oint |p_nu|^2 ds
    flux_p_tau: float       # oint |p_tau|^2 ds (pinned data)
    flux_r_nu: float        # oint |r_nu|^2 ds
    bulk_integral: float    # eps^-2 int g_b
    term_mixed: float       # (C/2) * R oint r_nu (cos 2t, sin 2t) . p_nu
    term_main: float        # the three non-mixed groups combined
    residual: float
    scale: float            # sum of term magnitudes, for relative residuals
    inequality_lhs: float   # R (L1 + C/2) oint |p0_tau|^2
    inequality_rhs: float   # 2 eps^-2 int g_b
    bound_rhs: float        # R (|C|/2) oint (|r_nu|^2/4 + |p_nu|^2)

    @property
    def inequality_ok(self) -> bool:
        return self.inequality_lhs >= self.inequality_rhs

    @property
    def bound_ok(self) -> bool:
        """Young-inequality cap on the mixed term (holds discretely too)."""
        return abs(self.term_mixed) <= self.bound_rhs * (1.0 + 1e-12) + 1e-12

    @property
    def residual_rel(self) -> float:
        return abs(self.residual) / max(self.scale, 1e-300)


def _padded_components(field) -> np.ndarray:
    """Field values with near-boundary exterior nodes filled from the trace."""
    return padded_with_trace(field.grid, field.u, field.bdata)


def pohozaev_check(field, params: ModelParams) -> PohozaevReport:
    """Evaluate the disk virial identity for a solved (p, r) field.

    Normal derivatives use one-sided second-order stencils along the inward
    normal with bilinear interpolation; tangential derivatives are the exact
    arc-length derivative of the trace formula.
    """
    grid = field.grid
    if not isinstance(grid.shape, Disk):
        raise NotADiskError("virial identity requires a disk domain")
    R = grid.shape.radius
    h = grid.h
    bdata = field.bdata

    upad = _padded_components(field)
    xb = grid.bpos
    nu = grid.bnormal
    w = grid.bweight

    bi, bj = grid.bloop[:, 0], grid.bloop[:, 1]
    dnu = np.empty((3, xb.shape[0]))
    for c in range(3):
        u0 = field.u[c, bi, bj]
        u1 = bilinear_sample(grid, upad[c], xb - h * nu)
        u2 = bilinear_sample(grid, upad[c], xb - 2.0 * h * nu)
        dnu[c] = (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * h)

    # arc-length derivative of the trace formula (r is constant on the loop)
    phase = 2.0 * np.pi * bdata.k * grid.bt + bdata.offset
    fac = np.pi * bdata.k * bdata.s / grid.perimeter
    ptau = fac * np.column_stack([-np.sin(phase), np.cos(phase)])

    flux_p_nu = float(np.sum(w * (dnu[0] ** 2 + dnu[1] ** 2)))
    flux_p_tau = float(np.sum(w * (ptau[:, 0] ** 2 + ptau[:, 1] ** 2)))
    flux_r_nu = float(np.sum(w * dnu[2] ** 2))

    cx, cy = grid.shape.center
    theta = np.arctan2(xb[:, 1] - cy, xb[:, 0] - cx)
    mixed_flux = float(
        np.sum(w * dnu[2] * (np.cos(2 * theta) * dnu[0] + np.sin(2 * theta) * dnu[1]))
    )

    L1, C = params.L1, params.C
    bulk_integral = total_G(field, params).bulk
    cp = R * (L1 + 0.5 * C)
    cr = R * (0.75 * L1 + 0.125 * C)
    term_main = cp * (flux_p_nu - flux_p_tau) + cr * flux_r_nu + 2.0 * bulk_integral
    term_mixed = 0.5 * C * R * mixed_flux
    residual = term_main + term_mixed

    scale = (
        abs(cp) * (flux_p_nu + flux_p_tau)
        + abs(cr) * flux_r_nu
        + 2.0 * bulk_integral
        + abs(term_mixed)
    )
    return PohozaevReport(
        radius=R,
        flux_p_nu=flux_p_nu,
        flux_p_tau=flux_p_tau,
        flux_r_nu=flux_r_nu,
        bulk_integral=bulk_integral,
        term_mixed=term_mixed,
        term_main=term_main,
        residual=residual,
        scale=scale,
        inequality_lhs=cp * flux_p_tau,
        inequality_rhs=2.0 * bulk_integral,
        bound_rhs=0.5 * abs(C) * R * (0.25 * flux_r_nu + flux_p_nu),
    )


# ----------------------------------------------------------------------------
# Bulk-energy ladder monitor


@dataclass(frozen=True)
class BulkBoundTable:
    """(eps, eps^-2 int g_b) per continuation rung, with growth flags."""

    rows: tuple
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations

    def max_entry(self) -> float:
        return max((b for _, b in self.rows), default=0.0)


def bulk_bound_monitor(report) -> BulkBoundTable:
    """Tabulate the weighted bulk integral along a solve ladder.

    The quantity should stay below an eps-independent constant; a rung where
    it grows by more than 50% over the previous one is flagged.
    """
    rows = []
    violations = []
    prev = None
    for rung in report.rungs:
        entry = (float(rung.eps), float(rung.energy.bulk))
        rows.append(entry)
        if prev is not None and prev[1] > 0 and entry[1] > 1.5 * prev[1]:
            violations.append(
                f"bulk integral grew {entry[1] / prev[1]:.2f}x from "
                f"eps={prev[0]:g} to eps={entry[0]:g}"
            )
        prev = entry
    return BulkBoundTable(rows=tuple(rows), violations=tuple(violations))


# ----------------------------------------------------------------------------
# Energy-vs-ln(1/eps) fits


def target_slope(spec) -> float:
    """Expected ln(1/eps) coefficient for a model family.

    Accepts a plain number, or a tuple tag::

        ("ldg", k, s, L1, L2, L3)  ->  (2 L1 + L2 + L3) s^2 pi k / 4
        ("gl", k)                  ->  pi k
        ("csh", k)                 ->  pi k
    """
    if isinstance(spec, (int, float, np.floating)):
        return float(spec)
    kind = str(spec[0]).lower()
    if kind == "ldg":
        if len(spec) == 4:
            k, s, (L1, L2, L3) = spec[1], spec[2], spec[3]
        elif len(spec) == 6:
            k, s, L1, L2, L3 = spec[1:]
        else:
            raise ValueError("ldg target takes (k, s, L1, L2, L3)")
        return (2.0 * L1 + L2 + L3) * s**2 * np.pi * k / 4.0
    if kind in ("gl", "csh"):
        return np.pi * float(spec[1])
    raise ValueError(f"unknown target family {spec[0]!r}")


@dataclass(frozen=True)
class AsymptoticsFit:
    """Least-squares line through (ln(1/eps), energy) samples."""

    samples: tuple          # ((eps, energy), ...) as fitted
    slope: float
    intercept: float
    target: float
    max_dev: float          # largest |energy - fit| over the samples

    @property
    def rel_slope_error(self) -> float:
        return abs(self.slope - self.target) / max(abs(self.target), 1e-300)


def fit_energy_asymptotics(samples, target) -> AsymptoticsFit:
    """Fit energy = slope * ln(1/eps) + intercept and compare the slope.

    ``samples`` is a sequence of (eps, energy) pairs; ``target`` anything
    accepted by :func:`target_slope`.  Requires at least four samples whose
    eps values span at least a factor of four.
    """
    pairs = sorted(((float(e), float(v)) for e, v in samples), reverse=True)
    if len(pairs) < 4:
        raise InsufficientSamplesError(f"{len(pairs)} samples; need >= 4")
    eps = np.array([p[0] for p in pairs])
    if eps.min() <= 0:
        raise InsufficientSamplesError("eps values must be positive")
    if eps.max() / eps.min() < 4.0 * (1.0 - 1e-12):
        raise InsufficientSamplesError(
            f"eps span {eps.max() / eps.min():.2f}x; need >= 4x"
        )
    vals = np.array([p[1] for p in pairs])
    x = np.log(1.0 / eps)
    slope, intercept = np.polyfit(x, vals, 1)
    fit = slope * x + intercept
    return AsymptoticsFit(
        samples=tuple(pairs),
        slope=float(slope),
        intercept=float(intercept),
        target=target_slope(target),
        max_dev=float(np.abs(vals - fit).max()),
    )


# ----------------------------------------------------------------------------
# Planar-vs-tensor energy offset


@dataclass(frozen=True)
class ShiftReport:
    """Difference between the planar energy and the full tensor energy.

    For degree-k/2 well data the gap G - F is the closed form
    (L3 - L2 + |L3 + L2|) s^2 pi k / 4, independent of the interior values.
    """

    G: float
    F: float
    expected: float

    @property
    def shift(self) -> float:
        return self.G - self.F

    @property
    def error(self) -> float:
        return abs(self.shift - self.expected)

    @property
    def rel_error(self) -> float:
        scale = abs(self.expected)
        if scale == 0.0:
            scale = max(abs(self.G), abs(self.F), 1.0)
        return self.error / scale


def corollary_shift_check(field, params: ModelParams) -> ShiftReport:
    """Compare the planar and tensor energies of one field to the closed form."""
    bdata = field.bdata
    expected = (
        (params.L3 - params.L2 + abs(params.L3 + params.L2))
        * bdata.s**2 * np.pi * bdata.k / 4.0
    )
    return ShiftReport(
        G=total_G(field, params).total,
        F=total_F(field, params),
        expected=float(expected),
    )
