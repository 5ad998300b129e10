"""Schrodinger phase, its time derivatives, and the Mehler-type propagator kernel.

Conventions
-----------
The phase is P(t, z, z') = t + |z - z'|^2 cot(t) / 4 + S(z, z') with the twisted
cross term S(z, z') = (z2 z1' - z1 z2') / 2.  The propagator kernel is

    K_t(z, z') = c / sin(t) * exp(i (P(t, z, z') - t)),   c = 1 / (4 pi i),

the constant being fixed by the small-time limit (4 pi i t)^-1 exp(i|z-z'|^2/(4t))
of the free propagator.  Complex times t - i eps (eps > 0) are handled by
evaluating the same closed form with complex trigonometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

C_PROPAGATOR = 1.0 / (4.0j * math.pi)
NORMALIZATION = "c = 1/(4*pi*i), fixed by the small-time free propagator limit"

SINGULAR_TOL = 1e-14
KERNEL_SINGULAR_TOL = 1e-10


class SingularTimeError(ValueError):
    """sin(t) vanishes (to the configured tolerance) at the requested time."""


class OutOfRegimeError(ValueError):
    """The requested quantity is not defined or not resolvable at this point."""


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def cross_term(z, zp):
    """S(z, z') = (z2 z1' - z1 z2') / 2."""
    z, zp = _arr(z), _arr(zp)
    return 0.5 * (z[..., 1] * zp[..., 0] - z[..., 0] * zp[..., 1])


def dist2(z, zp):
    d = _arr(z) - _arr(zp)
    return d[..., 0] ** 2 + d[..., 1] ** 2


@dataclass(frozen=True)
class PhasePoint:
    """A time and a pair of points, with |z - z'| and the cross term cached."""

    t: float
    z: tuple[float, float]
    zp: tuple[float, float]
    r: float = field(init=False)
    cross: float = field(init=False)

    def __post_init__(self):
        z = (float(self.z[0]), float(self.z[1]))
        zp = (float(self.zp[0]), float(self.zp[1]))
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "zp", zp)
        object.__setattr__(self, "r", math.hypot(z[0] - zp[0], z[1] - zp[1]))
        object.__setattr__(self, "cross", float(cross_term(z, zp)))

    @property
    def r2(self) -> float:
        return self.r * self.r


@dataclass(frozen=True)
class ComplexTime:
    """Time t - i eps; eps = 0 is only allowed away from the zeros of sin."""

    t: float
    eps: float = 0.0

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be >= 0")

    @property
    def value(self) -> complex:
        return complex(self.t, -self.eps)


def _check_sin(s, tol):
    if np.any(np.abs(s) < tol):
        raise SingularTimeError("sin(t) vanishes at the requested time")


# ---------------------------------------------------------------------------
# array-level phase functions (t may be complex)


def phase_r2(t, r2, cross):
    """P as a function of (t, |z - z'|^2, cross term); t may be complex."""
    return t + r2 * np.cos(t) / (4.0 * np.sin(t)) + cross


def dphase_r2(t, r2):
    return 1.0 - r2 / (4.0 * np.sin(t) ** 2)


def d2phase_r2(t, r2):
    return r2 * np.cos(t) / (2.0 * np.sin(t) ** 3)


def phase(t, z, zp):
    s = np.sin(t)
    _check_sin(s, SINGULAR_TOL)
    return phase_r2(t, dist2(z, zp), cross_term(z, zp))


# ---------------------------------------------------------------------------
# PhasePoint operations


def phase_P(p: PhasePoint) -> float:
    _check_sin(math.sin(p.t), SINGULAR_TOL)
    return float(phase_r2(p.t, p.r2, p.cross))


def dphase(p: PhasePoint) -> float:
    _check_sin(math.sin(p.t), SINGULAR_TOL)
    return float(dphase_r2(p.t, p.r2))


def d2phase(p: PhasePoint) -> float:
    _check_sin(math.sin(p.t), SINGULAR_TOL)
    return float(d2phase_r2(p.t, p.r2))


def comparability_ratio_r(t, r):
    """|dP/dt| / |(2 - r)(2 + r) - 4 cos^2 t|.

    Algebraically 4 sin^2(t) dP/dt = 4 sin^2 t - r^2 = (2-r)(2+r) - 4 cos^2 t, so
    the ratio equals 1 / (4 sin^2 t) wherever both sides are defined; that value
    is also the limit where numerator and denominator vanish together.
    """
    t, r = _arr(t), _arr(r)
    s2 = np.sin(t) ** 2
    if np.any(s2 < SINGULAR_TOL**2):
        raise SingularTimeError("sin(t) vanishes at the requested time")
    num = np.abs(1.0 - r * r / (4.0 * s2))
    den = np.abs((2.0 - r) * (2.0 + r) - 4.0 * np.cos(t) ** 2)
    limit = 1.0 / (4.0 * s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = num / den
    # near the sphere both terms are O(cancellation); use the exact limit there
    small = den <= 1e-8 * np.maximum(1.0, 4.0 * s2)
    out = np.where(small, limit, direct)
    if np.any(~np.isfinite(out)):
        raise OutOfRegimeError("denominator underflow")
    return out if out.ndim else float(out)


def comparability_ratio(p: PhasePoint) -> float:
    return float(comparability_ratio_r(p.t, p.r))


# ---------------------------------------------------------------------------
# propagator kernel


def mehler_r2(tau, r2, cross):
    """Propagator kernel as a function of complex time tau and (|z-z'|^2, cross)."""
    tau = np.asarray(tau, dtype=complex)
    s = np.sin(tau)
    return C_PROPAGATOR / s * np.exp(1j * (r2 * np.cos(tau) / (4.0 * s) + cross))


def mehler_kernel(ct: ComplexTime | float, z, zp, eps: float | None = None):
    """Kernel of exp(-i tau L) at tau = t - i eps, evaluated at (z, z')."""
    if not isinstance(ct, ComplexTime):
        ct = ComplexTime(float(ct), 0.0 if eps is None else float(eps))
    if ct.eps == 0.0:
        _check_sin(math.sin(ct.t), KERNEL_SINGULAR_TOL)
    out = mehler_r2(ct.value, dist2(z, zp), cross_term(z, zp))
    return out if np.ndim(out) else complex(out)


# ---------------------------------------------------------------------------
# symplectic reflection


L_MATRIX = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)


def symmetry_map_L(z):
    """Lz = (z1 + z2, z1 - z2) / sqrt(2)."""
    z = _arr(z)
    return np.stack([(z[..., 0] + z[..., 1]), (z[..., 0] - z[..., 1])], axis=-1) / math.sqrt(2.0)


def symmetry_check_arrays(t, z, zp):
    """P(pi - t, Lz, Lz') + P(t, z, z') - pi."""
    lz, lzp = symmetry_map_L(z), symmetry_map_L(zp)
    return phase(math.pi - _arr(t), lz, lzp) + phase(t, z, zp) - math.pi


def symmetry_check(p: PhasePoint) -> float:
    return float(symmetry_check_arrays(p.t, np.array(p.z), np.array(p.zp)))


def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])
