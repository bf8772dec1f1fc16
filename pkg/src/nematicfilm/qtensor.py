"""Order-parameter algebra on S (symmetric traceless 3x3) and its thin-film
subspace S0.

A tensor in S0 is parametrized by the linear change of variables

    Q(p, r) = [[p1 + r/2, p2,       0   ],
               [p2,       r/2 - p1, 0   ],
               [0,        0,        -r  ]]

with inverse p1 = (z1 - z3)/2, p2 = z2, r = z1 + z3 in the entry layout
z1 = Q11, z2 = Q12, z3 = Q22, z4 = Q13, z5 = Q23.  Everything downstream
(fields, energies, defects) works in (p, r); full tensors are materialized
only for verification and I/O.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

S0_TOL = 1e-12
DEGENERACY_TOL = 1e-9


class NotInS0Error(ValueError):
    """Raised when a tensor has out-of-plane couplings Q13/Q23 above tolerance."""


class ZeroPError(ValueError):
    """Raised when a director angle is requested at p = 0 (defect core)."""


class Phase(enum.Enum):
    ISOTROPIC = "isotropic"
    UNIAXIAL = "uniaxial"
    BIAXIAL = "biaxial"


@dataclass(frozen=True)
class PRPoint:
    """A point of S0 in (p, r) coordinates: p = (p1, p2), r scalar."""

    p1: float
    p2: float
    r: float

    @property
    def p(self) -> np.ndarray:
        return np.array([self.p1, self.p2])

    @property
    def pnorm(self) -> float:
        return math.hypot(self.p1, self.p2)


@dataclass(frozen=True)
class QTensor:
    """Symmetric traceless 3x3 tensor stored by its independent entries.

    z6 = -z1 - z3 is derived, so the trace vanishes exactly by storage.
    """

    z1: float
    z2: float
    z3: float
    z4: float = 0.0
    z5: float = 0.0

    @property
    def z6(self) -> float:
        return -self.z1 - self.z3

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.z1, self.z2, self.z4],
                [self.z2, self.z3, self.z5],
                [self.z4, self.z5, self.z6],
            ]
        )

    @classmethod
    def from_matrix(cls, m: np.ndarray, tol: float = 1e-12) -> "QTensor":
        m = np.asarray(m, dtype=float)
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > tol * scale:
            raise ValueError("matrix is not symmetric")
        if abs(m[0, 0] + m[1, 1] + m[2, 2]) > 1e-14 * scale:
            raise ValueError("matrix is not traceless")
        return cls(m[0, 0], m[0, 1], m[1, 1], m[0, 2], m[1, 2])

    def in_s0(self, tol: float = S0_TOL) -> bool:
        return abs(self.z4) + abs(self.z5) <= tol


@dataclass(frozen=True)
class EigenSystem:
    """Spectral data of Q(p, r): eigenvalues, phase class, leading in-plane angle.

    Eigenvalues are (r/2 + |p|, r/2 - |p|, -r) in that fixed order; ``angle``
    is the in-plane eigenvector direction of the first one, which is the
    director angle when that eigenvalue leads.
    """

    eigvals: tuple[float, float, float]
    phase: Phase
    angle: float


def from_pr(point: PRPoint) -> QTensor:
    """Assemble the S0 tensor for a (p, r) point."""
    return QTensor(
        z1=point.p1 + point.r / 2.0,
        z2=point.p2,
        z3=point.r / 2.0 - point.p1,
    )


def to_pr(q: QTensor, tol: float = S0_TOL) -> PRPoint:
    """Invert from_pr.  Rejects tensors with out-of-plane entries."""
    if abs(q.z4) + abs(q.z5) > tol:
        raise NotInS0Error(
            f"|Q13|+|Q23| = {abs(q.z4) + abs(q.z5):.3e} exceeds tolerance {tol:.1e}"
        )
    return PRPoint(p1=(q.z1 - q.z3) / 2.0, p2=q.z2, r=q.z1 + q.z3)


def eigensystem_pr(point: PRPoint, tol: float = DEGENERACY_TOL) -> EigenSystem:
    """Closed-form eigenvalues of Q(p, r) with phase classification.

    The eigenvalues are r/2 + |p|, r/2 - |p|, -r.  Classification uses a
    relative degeneracy gap |li - lj| <= tol * max(1, max|l|): all three
    close => isotropic, exactly one close pair => uniaxial, else biaxial.
    """
    pn = point.pnorm
    lams = (point.r / 2.0 + pn, point.r / 2.0 - pn, -point.r)
    scale = max(1.0, max(abs(l) for l in lams))
    close = [
        abs(lams[0] - lams[1]) <= tol * scale,
        abs(lams[0] - lams[2]) <= tol * scale,
        abs(lams[1] - lams[2]) <= tol * scale,
    ]
    n_close = sum(close)
    if n_close == 3:
        phase = Phase.ISOTROPIC
    elif n_close >= 1:
        phase = Phase.UNIAXIAL
    else:
        phase = Phase.BIAXIAL
    angle = 0.5 * math.atan2(point.p2, point.p1) if pn > 0 else 0.0
    return EigenSystem(eigvals=lams, phase=phase, angle=angle)


def invariants(point: PRPoint) -> tuple[float, float]:
    """(det Q, |Q|^2) from the closed forms on S0.

    det Q = (|p|^2 - r^2/4) r  and  |Q|^2 = 2|p|^2 + (3/2) r^2.
    """
    psq = point.p1 * point.p1 + point.p2 * point.p2
    det = (psq - point.r * point.r / 4.0) * point.r
    norm2 = 2.0 * psq + 1.5 * point.r * point.r
    return det, norm2


def director_angle(p1: float, p2: float) -> float:
    """Director angle in [0, pi): half the phase of p, as a line field m = -m."""
    if p1 == 0.0 and p2 == 0.0:
        raise ZeroPError("director undefined at |p| = 0")
    return (0.5 * math.atan2(p2, p1)) % math.pi


def director_angles(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Vectorized director angle; entries with p = 0 raise ZeroPError."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if np.any((p1 == 0.0) & (p2 == 0.0)):
        raise ZeroPError("director undefined at |p| = 0")
    return (0.5 * np.arctan2(p2, p1)) % math.pi
