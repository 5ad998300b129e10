"""Smooth bumps and partitions of unity.

Every partition below is exact by construction: each family is a normalized
quotient of a seed bump by the sum of its own translates or dilates, so the
identities hold to rounding error rather than to a truncation error.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

EPS0_DEFAULT = 2.0**-4
C_TRANSLATE_DEFAULT = 2.0**-4

# plateau and outer radius of eta_0 (the outer radius stays inside 2^-5)
ETA0_FLAT = 5.0 * 2.0**-8
ETA0_OUTER = 7.0 * 2.0**-8

# half-width of the seed of theta; translates by integers overlap
THETA_HALF_WIDTH = 0.75


def _arr(t) -> np.ndarray:
    return np.asarray(t, dtype=float)


def _scalar_out(t_in, out: np.ndarray):
    return out.item() if np.ndim(t_in) == 0 else out


# ---------------------------------------------------------------------------
# seed bump and the dyadic partition


def seed_bump(t):
    """zeta(t) = exp(-1/((t - 1/4)(1 - t))) on (1/4, 1), zero elsewhere."""
    x = _arr(t)
    out = np.zeros_like(x)
    m = (x > 0.25) & (x < 1.0)
    xm = x[m]
    out[m] = np.exp(-1.0 / ((xm - 0.25) * (1.0 - xm)))
    return _scalar_out(t, out)


def _dyadic_parts(t: np.ndarray):
    """For t > 0 write t = f 2^e with f in [1/2, 1).

    The only dilates 2^k t inside (1/4, 1) are f and f/2, so the dyadic sum of
    seed bumps at t equals zeta(f) + zeta(f/2).
    """
    f, e = np.frexp(t)
    return f, e, seed_bump(f), seed_bump(0.5 * f)


def psi(t):
    """Base dyadic bump: supp in [1/4, 1] and sum over l of psi(2^l t) = 1 for t > 0."""
    x = _arr(t)
    out = np.zeros_like(x)
    m = (x > 0.25) & (x < 1.0)
    if np.any(m):
        f, _, zf, zh = _dyadic_parts(x[m])
        out[m] = seed_bump(x[m]) / (zf + zh)
    return _scalar_out(t, out)


def dyadic_sum(t, k_min: float = -math.inf, k_max: float = math.inf):
    """sum_{k_min <= k <= k_max} psi(2^k t), exact for t > 0 and zero for t <= 0."""
    x = _arr(t)
    out = np.zeros_like(x)
    m = x > 0
    if np.any(m):
        f, e, zf, zh = _dyadic_parts(x[m])
        # psi(2^k t) is nonzero only for 2^k t = f (k = -e) or f/2 (k = -e-1)
        k1 = -e
        k2 = -e - 1
        num = np.where((k1 >= k_min) & (k1 <= k_max), zf, 0.0) + np.where(
            (k2 >= k_min) & (k2 <= k_max), zh, 0.0
        )
        out[m] = num / (zf + zh)
    return _scalar_out(t, out)


def psi_tail(t):
    """sum_{k >= 0} psi(2^k t); equals 1 on (0, 1/2] and 0 on [1, inf)."""
    return dyadic_sum(t, 0, math.inf)


def phi_j(j: int, t):
    """phi_j(t) = psi(2^j t)."""
    return psi(np.ldexp(_arr(t), j)) if np.ndim(t) else psi(math.ldexp(float(t), j))


def phi_tilde_j(j: int, t):
    """phi~_j(t) = psi(2^j |t|)."""
    return phi_j(j, np.abs(_arr(t)) if np.ndim(t) else abs(float(t)))


def psi_ell_delta(ell: int, delta: float, t):
    """psi_l^delta(t) = (2^-l t)^delta psi(2^-l t) for l >= 1, t_+^delta * tail(t) for l = 0."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    x = _arr(t)
    out = np.zeros_like(x)
    if ell >= 1:
        s = np.ldexp(x, -ell)
        m = (s > 0.25) & (s < 1.0)
        out[m] = s[m] ** delta * psi(s[m])
    else:
        m = x > 0
        out[m] = x[m] ** delta * psi_tail(x[m])
    return _scalar_out(t, out)


def riesz_reconstruction(lam: float, delta: float, t):
    """sum over 1 <= 2^l <= 4 lam of 2^(delta l) psi_l^delta(t); equals t_+^delta for 0 < t <= lam."""
    x = _arr(t)
    total = np.zeros_like(x)
    ell = 0
    while 2.0**ell <= 4.0 * lam:
        total += 2.0 ** (delta * ell) * psi_ell_delta(ell, delta, x)
        ell += 1
    return _scalar_out(t, total)


# ---------------------------------------------------------------------------
# smooth steps, plateau bumps, eta pair


def smooth_step(x):
    """C^infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x)."""
    x = _arr(x)
    out = np.where(x >= 1.0, 1.0, 0.0)
    m = (x > 0.0) & (x < 1.0)
    xm = x[m]
    a = np.exp(-1.0 / xm)
    b = np.exp(-1.0 / (1.0 - xm))
    out[m] = a / (a + b)
    return out


def plateau(t, flat: float, outer: float):
    """Even bump equal to 1 on [-flat, flat] and 0 outside (-outer, outer)."""
    x = np.abs(_arr(t))
    return _scalar_out(t, 1.0 - smooth_step((x - flat) / (outer - flat)))


def eta0(t):
    return plateau(t, ETA0_FLAT, ETA0_OUTER)


def eta1(t):
    """1 - eta0(t) - eta0(t - pi) on [0, pi], zero elsewhere."""
    x = _arr(t)
    out = np.zeros_like(x)
    m = (x >= 0.0) & (x <= math.pi)
    xm = x[m]
    out[m] = 1.0 - eta0(xm) - eta0(xm - math.pi)
    return _scalar_out(t, out)


def eta_pair(t):
    return eta0(t), eta1(t)


def rho(x):
    """Equal to 1 on [-1, 1], supported in (-1.9, 1.9)."""
    return plateau(x, 1.0, 1.9)


def rho0(x):
    """Equal to 1 on [-1/2, 1/2], supported in (-1, 1)."""
    return plateau(x, 0.5, 0.95)


def compact_bump(x):
    """exp(1 - 1/(1 - x^2)) on (-1, 1); peak value 1 at x = 0."""
    x = _arr(x)
    out = np.zeros_like(x)
    m = np.abs(x) < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - x[m] ** 2))
    return out


def interval_bump(a: float, b: float, t):
    """Smooth bump supported in (a, b) with peak 1 at the midpoint."""
    x = _arr(t)
    return _scalar_out(t, compact_bump((2.0 * x - a - b) / (b - a)))


def eta_rho(rho_: float, t):
    """Window of width ~rho: psi(|t| / rho); supported in rho/4 <= |t| <= rho."""
    x = np.abs(_arr(t)) / rho_
    return _scalar_out(t, psi(x))


# ---------------------------------------------------------------------------
# theta: integer-translate partition


def _theta_seed(x):
    return compact_bump(_arr(x) / THETA_HALF_WIDTH)


def theta(x):
    """Bump with supp in (-1, 1) whose integer translates sum to one."""
    x = _arr(x)
    out = np.zeros_like(x)
    m = np.abs(x) < THETA_HALF_WIDTH
    if np.any(m):
        xm = x[m]
        den = np.zeros_like(xm)
        for k in (-1, 0, 1):
            den += _theta_seed(xm - k)
        out[m] = _theta_seed(xm) / den
    return out if out.ndim else out.item()


def theta_partition(x, k_values):
    """sum over the given integers k of theta(x - k)."""
    x = _arr(x)
    total = np.zeros_like(x)
    for k in k_values:
        total += theta(x - k)
    return total


def lattice_bump(x, y):
    """theta(x) * theta(y)."""
    return np.asarray(theta(x)) * np.asarray(theta(y))


def lattice_scales(j: int, eps0: float = EPS0_DEFAULT) -> tuple[float, float]:
    """Inverse cell sizes of the anisotropic lattice tiling at scale j."""
    return 2.0 ** (j + 3) / eps0, 2.0 ** ((j + 3) / 2) / eps0


def lattice_piece(k: tuple[int, int], j: int, z, eps0: float = EPS0_DEFAULT):
    """theta(s1 z1 - k1) theta(s2 z2 - k2) with the anisotropic scales of ``lattice_scales``."""
    z = _arr(z)
    s1, s2 = lattice_scales(j, eps0)
    return lattice_bump(s1 * z[..., 0] - k[0], s2 * z[..., 1] - k[1])


# ---------------------------------------------------------------------------
# distance-to-sphere split


def j0_of_lambda(lam: float) -> int:
    """Largest integer j with 2^j <= lam^(2/3), i.e. 2^(3j) <= lam^2."""
    if lam < 1:
        return 0
    j = int(math.floor(math.log2(lam) * 2.0 / 3.0))
    while 2.0 ** (3 * (j + 1)) <= lam * lam:
        j += 1
    while j > 0 and 2.0 ** (3 * j) > lam * lam:
        j -= 1
    return j


def _distance(z, zp) -> np.ndarray:
    d = _arr(z) - _arr(zp)
    return np.hypot(d[..., 0], d[..., 1])


def chi_j(j: int, r):
    """chi_j as a function of r = |z - z'|: psi(2^(j-2) (2 - r))."""
    u = 2.0 - _arr(r)
    return psi(np.ldexp(u, j - 2))


def chi_split_r(j_max: int, r):
    """(chi_j for 0 <= j <= j_max stacked on axis 0, chi_circ, chi_ext) as functions of r."""
    r = _arr(r)
    u = 2.0 - r
    pieces = np.stack([chi_j(j, r) for j in range(j_max + 1)])
    absu = np.abs(u)
    # sum_{j > j_max} psi(2^(j-2)|u|) = sum_{m >= j_max - 1} psi(2^m |u|)
    circ = dyadic_sum(absu, j_max - 1, math.inf)
    # complement: for u > 0 the remaining dilates are m < -2; for u < 0 it is 1 - circ
    ext = np.where(u > 0, dyadic_sum(absu, -math.inf, -3), np.where(u < 0, 1.0 - circ, 1.0))
    return pieces, circ, ext


def chi_split(j_max: int, z, zp):
    return chi_split_r(j_max, _distance(z, zp))


def chi_tilde_r(a: float, j: int, r, eps0: float = EPS0_DEFAULT, c: float = C_TRANSLATE_DEFAULT,
                *, check: bool = True):
    """psi(2^j (2 - r)) theta((a - r) / (c eps0 2^-j))."""
    h = c * eps0 * 2.0**-j
    if check:
        lo, hi = 2.0**-(j + 2) - h, 2.0**-j + h
        if not (lo < 2.0 - a < hi):
            raise ValueError(f"2 - a = {2.0 - a} outside ({lo}, {hi})")
    r = _arr(r)
    return psi(np.ldexp(2.0 - r, j)) * theta((a - r) / h)


def chi_tilde(a: float, j: int, eps0: float, c: float, z, zp):
    return chi_tilde_r(a, j, _distance(z, zp), eps0, c)


def chi_tilde_centers(j: int, eps0: float = EPS0_DEFAULT, c: float = C_TRANSLATE_DEFAULT) -> np.ndarray:
    """Centres a_k of the translate family; the theta factors sum to 1 on supp psi(2^j(2 - .)).

    The family is a_k = 2 - 2^-j + k h, h = c eps0 2^-j, keeping every k whose
    translate meets 2 - r in [2^-(j+2), 2^-j].
    """
    h = c * eps0 * 2.0**-j
    base = 2.0 - 2.0**-j
    k_hi = int(math.ceil((2.0 - 2.0 ** -(j + 2) - base) / h)) + 1
    ks = np.arange(-1, k_hi + 1)
    return base + ks * h


# ---------------------------------------------------------------------------
# angular caps


def angular_count(j: int, eps0: float = EPS0_DEFAULT) -> int:
    """Number of equally spaced cap centres; spacing is at most eps0 2^(-j/2)."""
    n = int(math.ceil(2.0 * math.pi / (eps0 * 2.0 ** (-j / 2))))
    return max(n, 3)


def angular_centers(j: int, eps0: float = EPS0_DEFAULT) -> np.ndarray:
    """Angles of the separated set of cap centres."""
    n = angular_count(j, eps0)
    return 2.0 * math.pi * np.arange(n) / n


def _angle(v) -> np.ndarray:
    v = _arr(v)
    return np.arctan2(v[..., 1], v[..., 0])


def angular_bump_angle(nu_angle: float, j: int, eps0: float, omega_angle):
    """Cap bump in angle variables; the family over ``angular_centers`` sums to one."""
    n = angular_count(j, eps0)
    spacing = 2.0 * math.pi / n
    # work in units of the spacing so that all translates see the same argument
    k = nu_angle / spacing
    if abs(k - round(k)) < 1e-9:
        k = float(round(k))
    y = _arr(omega_angle) / spacing - k
    y = np.remainder(y + 0.5 * n, n) - 0.5 * n
    return theta(y)


def angular_bump(nu, j: int, eps0: float, omega):
    """Cap bump at centre nu (unit vector) evaluated at unit vector(s) omega."""
    nu_angle = float(_angle(nu))
    n = angular_count(j, eps0)
    centers = angular_centers(j, eps0)
    spacing = 2.0 * math.pi / n
    k = int(round(nu_angle / spacing)) % n
    if abs(np.angle(np.exp(1j * (centers[k] - nu_angle)))) > 1e-9:
        raise ValueError("nu is not a cap centre of the separated set")
    return angular_bump_angle(centers[k], j, eps0, _angle(omega))


def cap_radius(j: int, eps0: float = EPS0_DEFAULT) -> float:
    return eps0 * 2.0 ** (1 - j / 2)


# ---------------------------------------------------------------------------
# serializable descriptions


@dataclass(frozen=True)
class BumpSpec:
    kind: str  # seed | dyadic-piece | interval | angular
    support: tuple[float, float]
    smoothing: tuple[float, ...] = ()


_KINDS = {
    "psi": (BumpSpec("seed", (0.25, 1.0)), lambda p, t: psi(t)),
    "psi_ell_delta": (None, lambda p, t: psi_ell_delta(int(p["ell"]), p["delta"], t)),
    "phi": (None, lambda p, t: phi_j(int(p["j"]), t)),
    "phi_tilde": (None, lambda p, t: phi_tilde_j(int(p["j"]), t)),
    "eta0": (BumpSpec("interval", (-ETA0_OUTER, ETA0_OUTER), (ETA0_FLAT,)), lambda p, t: eta0(t)),
    "eta1": (BumpSpec("interval", (2.0**-6, math.pi - 2.0**-6)), lambda p, t: eta1(t)),
    "theta": (BumpSpec("interval", (-THETA_HALF_WIDTH, THETA_HALF_WIDTH)), lambda p, t: theta(t)),
    "rho": (BumpSpec("interval", (-1.9, 1.9), (1.0,)), lambda p, t: rho(t)),
    "rho0": (BumpSpec("interval", (-0.95, 0.95), (0.5,)), lambda p, t: rho0(t)),
    "interval_bump": (None, lambda p, t: interval_bump(p["a"], p["b"], t)),
    "eta_rho": (None, lambda p, t: eta_rho(p["rho"], t)),
    "angular": (None, lambda p, t: angular_bump_angle(p["nu_angle"], int(p["j"]), p["eps0"], t)),
}


@dataclass(frozen=True)
class CutoffFamily:
    """A named cutoff with its index parameters; callable and JSON-serializable."""

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown cutoff kind {self.kind!r}")

    def __call__(self, t):
        return _KINDS[self.kind][1](self.params, t)

    def spec(self) -> BumpSpec:
        fixed = _KINDS[self.kind][0]
        if fixed is not None:
            return fixed
        p = self.params
        if self.kind == "psi_ell_delta":
            ell = int(p["ell"])
            return BumpSpec("dyadic-piece", (0.0 if ell == 0 else 2.0 ** (ell - 2), 2.0**ell))
        if self.kind in ("phi", "phi_tilde"):
            j = int(p["j"])
            lo = 2.0 ** (-j - 2)
            return BumpSpec("dyadic-piece", (lo if self.kind == "phi" else -2.0**-j, 2.0**-j))
        if self.kind == "interval_bump":
            return BumpSpec("interval", (p["a"], p["b"]))
        if self.kind == "eta_rho":
            return BumpSpec("interval", (-p["rho"], p["rho"]))
        n = angular_count(int(p["j"]), p["eps0"])
        w = 2.0 * math.pi / n * THETA_HALF_WIDTH
        return BumpSpec("angular", (p["nu_angle"] - w, p["nu_angle"] + w))

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "params": self.params}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CutoffFamily":
        d = json.loads(text)
        return cls(d["kind"], d.get("params", {}))

    def as_dict(self) -> dict:
        return asdict(self)
