"""Stationary point geometry, the leading stationary-phase term, and the rescaled phase near the sphere.

For 0 < r = |z - z'| < 2 the phase t -> P(t, z, z') has the stationary point
S_c = arcsin(r / 2) in (0, pi/2) with P''(S_c) = 2 cot S_c > 0.  The stationary
value is Phi = S_c + cos S_c sin S_c + S(z, z').

Near the sphere r = 2 the map L_j(z, z') = (2^-j z1 + 2, 2^-j/2 z2, 2^-j z1',
2^-j/2 z2') blows the 2^-j neighbourhood up to unit size.  All quantities in
``scaled_geometry`` are computed from cancellation-free expressions so that
the O(2^-j) residuals are resolved at j = 10 and beyond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb, factorial
from scipy.stats import qmc

from . import cutoffs as co
from .discretization import DenseOperator, Grid2D
from .propagator import cross_term, d2phase_r2, dist2, dphase_r2, phase_r2

EPS0_DEFAULT = co.EPS0_DEFAULT
B_DEFAULT = 0.5
SERIES_SWITCH = 0.5  # |x| below which x - sin x is summed as a series
SERIES_TERMS = 12


class OutOfRangeError(ValueError):
    """|z - z'| > 2: no real stationary point (the exterior analysis applies)."""


class DegenerateAmplitudeError(ValueError):
    """cos S_c = 0, so the square-root factor of the amplitude blows up."""


class RegimeError(ValueError):
    """Parameters outside the regime where the leading term is asserted."""


class OutsideBoxError(ValueError):
    """Scaled coordinates outside the box U."""


def _pair_r(z, zp) -> np.ndarray:
    return np.sqrt(dist2(z, zp))


def _out(x):
    x = np.asarray(x)
    return x if x.ndim else x.item()


# ---------------------------------------------------------------------------
# stationary point


def stationary_point_r(r):
    """arcsin(r / 2) for 0 < r <= 2."""
    r = np.asarray(r, dtype=float)
    if np.any(r > 2.0):
        raise OutOfRangeError("|z - z'| > 2 has no real stationary point")
    if np.any(r <= 0.0):
        raise ValueError("stationary point needs z != z'")
    return _out(np.arcsin(0.5 * r))


def stationary_point(z, zp):
    return stationary_point_r(_pair_r(z, zp))


def Phi(z, zp):
    """S_c + cos S_c sin S_c + S(z, z')."""
    sc = np.asarray(stationary_point(z, zp))
    return _out(sc + np.cos(sc) * np.sin(sc) + cross_term(z, zp))


def Phi_via_phase(z, zp):
    """P(S_c, z, z'), the same value through the phase itself."""
    sc = np.asarray(stationary_point(z, zp))
    return _out(phase_r2(sc, dist2(z, zp), cross_term(z, zp)))


def stationarity_residual(z, zp):
    """dP/dt at S_c; zero up to rounding."""
    sc = np.asarray(stationary_point(z, zp))
    return _out(dphase_r2(sc, dist2(z, zp)))


def d2_scaled(j: int, sc):
    """Second derivative of the rescaled phase at 0: 2^(1 + j/2) cos S_c / sin S_c."""
    sc = np.asarray(sc, dtype=float)
    return _out(2.0 ** (1.0 + j / 2.0) * np.cos(sc) / np.sin(sc))


def _evaluate(fn, z, zp):
    if fn is None:
        return 1.0
    if callable(fn):
        return np.asarray(fn(z, zp))
    return np.asarray(fn)


def amplitude_A(j: int, chi, eta, z, zp):
    """2^(-j/4) chi(z, z') eta(S_c) (tan S_c)^(1/2).

    ``chi`` is a callable (z, z') -> value or a number; ``eta`` a callable of t.
    """
    sc = np.asarray(stationary_point(z, zp))
    c = np.cos(sc)
    if np.any(c <= 1e-15):
        raise DegenerateAmplitudeError("cos S_c = 0 at |z - z'| = 2")
    return _out(2.0 ** (-j / 4.0) * _evaluate(chi, z, zp) * np.asarray(eta(sc)) * np.sqrt(np.sin(sc) / c))


@dataclass(frozen=True)
class StationaryData:
    j: int
    S_c: float
    Phi: float
    A: float
    d2: float  # second derivative of the rescaled phase at 0

    def to_dict(self) -> dict:
        return {"j": self.j, "S_c": self.S_c, "Phi": self.Phi, "A": self.A, "d2": self.d2}


def stationary_data(j: int, z, zp, eta=None, chi=None) -> StationaryData:
    sc = float(stationary_point(z, zp))
    a = float(amplitude_A(j, chi, eta, z, zp)) if eta is not None else math.nan
    return StationaryData(j, sc, float(Phi(z, zp)), a, float(d2_scaled(j, sc)))


# ---------------------------------------------------------------------------
# leading stationary-phase term


def leading_term(lam: float, j: int, w, chi, z, zp, *, check: bool = True):
    """Leading term of chi [eta]^lambda at (z, z') from the stationary point S_c.

    lambda^(-1/2) 2^(j/4) chi eta~(0) (d2 / 2 pi)^(-1/2) exp(i lambda Phi + i pi/4), where
    eta~(0) = eta(S_c) / sin S_c carries the 1/sin t factor of the kernel.
    """
    r = _pair_r(z, zp)
    if check:
        if not 2.0**j <= lam ** (2.0 / 3.0) + 1e-12:
            raise RegimeError("needs 2^j <= lambda^(2/3)")
        if np.any(r >= 2.0):
            raise RegimeError("leading term needs |z - z'| < 2")
    sc = np.asarray(stationary_point(z, zp))
    d2 = np.asarray(d2_scaled(j, sc))
    eta_t = np.asarray(w(sc)) / np.sin(sc)
    amp = lam**-0.5 * 2.0 ** (j / 4.0) * eta_t / np.sqrt(d2 / (2.0 * math.pi))
    phase = lam * (sc + np.cos(sc) * np.sin(sc) + cross_term(z, zp))
    return _out(_evaluate(chi, z, zp) * amp * np.exp(1j * (phase + math.pi / 4.0)))


def error_term(lam: float, j: int, w, chi, z, zp, **kw):
    """E = chi [eta]^lambda - leading term."""
    from .oscillatory_kernels import bracket_kernel

    k = bracket_kernel(w.with_lambda(lam), z, zp, **kw)
    return _out(_evaluate(chi, z, zp) * k - leading_term(lam, j, w, chi, z, zp))


@dataclass(frozen=True)
class DecayCase:
    """A window and pair inside supp chi~ for the E-decay experiment.

    The pair sits at |z - z'| = a = 2 - offset 2^-j and the window is a bump of
    half-width eps0 2^(1 - j/2) centred at t0 = S_c, so S_c is the only
    stationary point in its support.
    """

    j: int = 3
    eps0: float = 0.5
    offset: float = 0.75

    @property
    def a(self) -> float:
        return 2.0 - self.offset * 2.0**-self.j

    @property
    def t0(self) -> float:
        return math.asin(0.5 * self.a)

    @property
    def half_width(self) -> float:
        return self.eps0 * 2.0 ** (1.0 - self.j / 2.0)

    def window(self, lam: float):
        from .oscillatory_kernels import WindowedSymbol

        lo, hi = self.t0 - self.half_width, self.t0 + self.half_width
        if not (0.0 < lo and hi < math.pi - self.t0):
            raise RegimeError("window must exclude 0 and the second stationary point pi - S_c")
        return WindowedSymbol.interval(lo, hi, lam)

    def chi(self, z, zp):
        return co.chi_tilde_r(self.a, self.j, _pair_r(z, zp))

    def points(self):
        return np.array([self.a, 0.0]), np.array([0.0, 0.0])


def e_decay_scan(lams=tuple(2.0 ** np.arange(8, 15)), case: DecayCase | None = None):
    """|E(lambda)| at a fixed pair; the log-log slope should be -3/2."""
    from .operator_lab import _loglog_report

    case = case or DecayCase()
    z, zp = case.points()
    vals, lead = [], []
    for lam in lams:
        w = case.window(lam)
        vals.append(abs(error_term(lam, case.j, w, case.chi, z, zp)))
        lead.append(abs(leading_term(lam, case.j, w, case.chi, z, zp)))
    params = {"j": case.j, "eps0": case.eps0, "offset": case.offset, "a": case.a, "t0": case.t0}
    return _loglog_report("e-decay", params, list(map(float, lams)), vals, -1.5, 0.15, 0, upper_only=False,
                          extra={"leading_abs": lead})


# ---------------------------------------------------------------------------
# scaled geometry near the sphere


def L_j(j: int, z, zp):
    z, zp = np.asarray(z, dtype=float), np.asarray(zp, dtype=float)
    s1, s2 = 2.0**-j, 2.0 ** (-j / 2.0)
    w = np.stack([s1 * z[..., 0] + 2.0, s2 * z[..., 1]], axis=-1)
    wp = np.stack([s1 * zp[..., 0], s2 * zp[..., 1]], axis=-1)
    return w, wp


def x_minus_sin(x):
    """x - sin x without cancellation for small |x|."""
    x = np.asarray(x, dtype=float)
    out = x - np.sin(x)
    small = np.abs(x) < SERIES_SWITCH
    if np.any(small):
        xs = x[small]
        acc = np.zeros_like(xs)
        for k in range(SERIES_TERMS, 0, -1):
            acc += (-1) ** (k + 1) * xs ** (2 * k + 1) / factorial(2 * k + 1)
        out[small] = acc
    return out


def scaffold_g(u):
    """g with 1 - cos(sigma) = g(sigma^2); g(0) = 0, g'(0) = 1/2."""
    u = np.asarray(u, dtype=float)
    k = np.arange(1, SERIES_TERMS + 1)
    terms = (-1.0) ** (k + 1) / factorial(2 * k)
    return _out(np.polynomial.polynomial.polyval(u, np.concatenate([[0.0], terms])))


def scaffold_E(t):
    """E with S~^2 = t (1 + t E(t)) where 1 - cos S~ = t / 2; E(0) = 1/12.

    From 4 arcsin^2(sqrt(t) / 2) = 2 sum_n t^n / (n^2 binom(2n, n)).
    """
    t = np.asarray(t, dtype=float)
    n = np.arange(2, 2 * SERIES_TERMS + 2)
    coef = 2.0 / (n**2 * comb(2 * n, n))
    return _out(np.polynomial.polynomial.polyval(t, coef))


@dataclass(frozen=True)
class ScaledGeometry:
    j: int
    b: float
    t_tilde_j: np.ndarray
    P: np.ndarray
    S_tilde_j: np.ndarray
    Phi_star: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    E3: np.ndarray
    ratio: np.ndarray  # 2^(3j/2) (pi/2 - p o L_j) / P^(3/2), tends to 2/3
    extra: dict = field(default_factory=dict)


def in_box(z, zp, b: float = B_DEFAULT, eps0: float = EPS0_DEFAULT) -> np.ndarray:
    z, zp = np.asarray(z, dtype=float), np.asarray(zp, dtype=float)
    return ((np.abs(z[..., 0] + b) < eps0) & (np.abs(zp[..., 0]) < eps0)
            & (np.abs(z[..., 1]) < eps0) & (np.abs(zp[..., 1]) < eps0))


def frak_P(j: int, z, zp):
    """z1' - z1 - (z2 - z2')^2 / (2 (2 + 2^-j (z1 - z1')))."""
    z, zp = np.asarray(z, dtype=float), np.asarray(zp, dtype=float)
    d1 = z[..., 0] - zp[..., 0]
    d2 = z[..., 1] - zp[..., 1]
    return -d1 - d2**2 / (2.0 * (2.0 + 2.0**-j * d1))


def _scaled_core(j: int, z, zp):
    """(t~_j, S~ (unscaled), q = pi/2 - p o L_j, |L_j separation|)."""
    z, zp = np.asarray(z, dtype=float), np.asarray(zp, dtype=float)
    d1 = z[..., 0] - zp[..., 0]
    d2 = z[..., 1] - zp[..., 1]
    e = 2.0**-j * d1
    sep = np.sqrt((2.0 + e) ** 2 + 2.0**-j * d2**2)
    # 2^j (4 - |d|^2) = -4 d1 - 2^-j d1^2 - d2^2, then divide by 2 + |d|
    tj = (-4.0 * d1 - 2.0**-j * d1**2 - d2**2) / (2.0 + sep)
    t = 2.0**-j * tj
    if np.any(t < 0):
        raise OutOfRangeError("scaled pair lies outside the sphere")
    s = 2.0 * np.arcsin(0.5 * np.sqrt(t))
    q = 0.5 * x_minus_sin(2.0 * s)
    return tj, s, q, sep


def scaled_geometry(j: int, z, zp, b: float = B_DEFAULT, eps0: float = EPS0_DEFAULT, *,
                    check: bool = True) -> ScaledGeometry:
    """Scaled quantities on U; affine terms of the phase are removed exactly.

    2^(3j/2) Phi o L_j = 2^(3j/2) pi/2 - 2^(3j/2) q + S(z, z') - 2^j z2', so
    Phi* := -2^(3j/2) q + S(z, z') and E3 = Phi* + (2/3) P^(3/2) - S.
    """
    if check and not np.all(in_box(z, zp, b, eps0)):
        raise OutsideBoxError("points outside U")
    tj, s, q, _ = _scaled_core(j, z, zp)
    P = frak_P(j, z, zp)
    sj = 2.0 ** (j / 2.0) * s
    big = 2.0 ** (1.5 * j) * q
    cross = cross_term(z, zp)
    p32 = P**1.5
    return ScaledGeometry(j, b, tj, P, sj, -big + cross, tj - P, sj - np.sqrt(P), p32 * (2.0 / 3.0) - big,
                          big / p32)


def sample_box(count: int = 10_000, b: float = B_DEFAULT, eps0: float = EPS0_DEFAULT, seed: int = 0,
               shrink: float = 0.999):
    """Scrambled Sobol points in U as (z, z') arrays of shape (count, 2)."""
    m = int(math.ceil(math.log2(max(count, 2))))
    u = qmc.Sobol(4, scramble=True, seed=seed).random_base2(m)[:count]
    x = (2.0 * u - 1.0) * eps0 * shrink
    z = np.stack([x[:, 0] - b, x[:, 1]], axis=-1)
    zp = np.stack([x[:, 2], x[:, 3]], axis=-1)
    return z, zp


def residual_scan(js=(6, 8, 10), count: int = 10_000, b: float = B_DEFAULT, eps0: float = EPS0_DEFAULT,
                  seed: int = 0, factor: float = 2.0, ratio_constant: float = 5.0):
    """sup_U |E2| 2^j across j (should be stable) and the 2/3-coefficient check."""
    from .operator_lab import ScanReport, fit_slope

    z, zp = sample_box(count, b, eps0, seed)
    d2_4 = (z[:, 1] - zp[:, 1]) ** 4
    far = d2_4 >= (0.5 * eps0) ** 4  # E1 is at rounding level where z2 = z2'
    consts, ratio_dev, e1c, e3c = [], [], [], []
    for j in js:
        g = scaled_geometry(j, z, zp, b, eps0)
        consts.append(float(np.max(np.abs(g.E2)) * 2.0**j))
        ratio_dev.append(float(np.max(np.abs(g.ratio - 2.0 / 3.0)) * 2.0**j))
        e1c.append(float(np.max(np.abs(g.E1[far]) / d2_4[far]) * 2.0**j))
        e3c.append(float(np.max(np.abs(g.E3)) * 2.0**j))
    stable = max(consts) / min(consts) <= factor
    ratio_ok = max(ratio_dev) <= ratio_constant
    xs = [2.0**j for j in js]
    sups = [c * 2.0**-j for c, j in zip(consts, js)]
    slope, icpt, res = fit_slope(np.log(xs), np.log(sups))
    return ScanReport("scaled-residuals", {"js": list(js), "count": count, "b": b, "eps0": eps0}, xs, sups,
                      slope, icpt, res, -1.0, 0.0, bool(stable and ratio_ok), seed,
                      extra={"C_E2": consts, "ratio_dev_scaled": ratio_dev, "C_E1": e1c, "C_E3": e3c,
                             "stability_factor": max(consts) / min(consts), "ratio_constant": ratio_constant})


def kappa(s):
    """(s / sin s)^(1/2), with kappa(0) = 1."""
    s = np.asarray(s, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(np.abs(s) < 1e-8, 1.0 + s**2 / 12.0, np.sqrt(s / np.sin(s)))
    return _out(out)


def b1_factorization(j: int, z, zp):
    """(2^(-j/4) (cos S_c o L_j)^(-1/2), S~_j^(-1/2) kappa(2^(-j/2) S~_j)); equal on U."""
    w, wp = L_j(j, z, zp)
    sc = np.arcsin(0.5 * _pair_r(w, wp))
    lhs = 2.0 ** (-j / 4.0) / np.sqrt(np.cos(sc))
    _, s, _, _ = _scaled_core(j, z, zp)
    sj = 2.0 ** (j / 2.0) * s
    return lhs, sj**-0.5 * np.asarray(kappa(s))


def scaled_amplitude(j: int, z, zp):
    """2^(-j/4) (tan S_c)^(1/2) o L_j, the cutoff-free part of the scaled amplitude."""
    _, s, _, _ = _scaled_core(j, z, zp)
    return 2.0 ** (-j / 4.0) * np.sqrt(np.cos(s) / np.sin(s))


# ---------------------------------------------------------------------------
# Carleson-Sjolin determinant


def model_phase(z1, z2, s, z1p):
    """phi(z, s) = (2 (z1' - z1) + 2 z1^(1/2) z2, z1^(1/2)) . (-s, s^2) / 4."""
    r = np.sqrt(z1)
    return 0.25 * (-(2.0 * (z1p - z1) + 2.0 * r * z2) * s + r * s * s)


def cs_matrix_closed(z1, z2, s):
    """Closed-form rows (grad_z d_s phi ; grad_z d_s^2 phi)."""
    r = np.sqrt(np.asarray(z1, dtype=float))
    z2, s = np.asarray(z2, dtype=float), np.asarray(s, dtype=float)
    row1 = np.stack([0.25 * (2.0 - (z2 - s) / r), -0.5 * r * np.ones_like(z2)], axis=-1)
    row2 = np.stack([0.25 / r * np.ones_like(z2), np.zeros_like(row1[..., 0])], axis=-1)
    return np.stack([row1, row2], axis=-2)


def _check_cs_domain(z1, z2, s, eps0):
    if np.any(np.asarray(z1) <= 0):
        raise ValueError("z1 must be positive")
    if np.any(np.abs(z2) > eps0) or np.any(np.abs(s) > eps0):
        raise ValueError("|z2|, |s| must not exceed eps0")


def cs_determinant_closed(z1, z2, s, z1p, eps0: float = EPS0_DEFAULT):
    """det M(phi) as det[[-1, 2s], [0, 2]] det[[., 2 z1^(1/2)], [z1^(-1/2)/2, 0]] / 16."""
    _check_cs_domain(z1, z2, s, eps0)
    z1, z2, s, z1p = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (z1, z2, s, z1p)))
    r2 = 2.0 * np.sqrt(z1)
    first = -2.0 * np.ones_like(s)  # det[[-1, 2s], [0, 2]]
    second = -(r2 / r2)  # 2 z1^(1/2) times z1^(-1/2) / 2, exactly 1
    return _out(first * second / 16.0)


def fd_cs_matrix(f, z1, z2, s, *, h_s: float = 2.0**-4, h_z: float = 1e-4, richardson: bool = True):
    """Rows (grad_z d_s f ; grad_z d_s^2 f) by central differences.

    The s-derivatives use the 3-point stencils (exact for quadratics in s); the
    z-derivatives use central differences of step h_z relative to max(1, |z|),
    extrapolated once when ``richardson``.
    """
    z1, z2, s = (np.asarray(v, dtype=float) for v in (z1, z2, s))

    def s_derivs(a, b):
        fp, f0, fm = f(a, b, s + h_s), f(a, b, s), f(a, b, s - h_s)
        return (fp - fm) / (2.0 * h_s), (fp - 2.0 * f0 + fm) / h_s**2

    def dz(axis, h):
        e1, e2 = (h, 0.0) if axis == 0 else (0.0, h)
        p1, p2 = s_derivs(z1 + e1, z2 + e2)
        m1, m2 = s_derivs(z1 - e1, z2 - e2)
        return (p1 - m1) / (2.0 * h), (p2 - m2) / (2.0 * h)

    cols = []
    for axis, zc in ((0, z1), (1, z2)):
        h = h_z * np.maximum(1.0, np.abs(zc))
        a1, a2 = dz(axis, h)
        if richardson:
            b1, b2 = dz(axis, 0.5 * h)
            a1, a2 = (4.0 * b1 - a1) / 3.0, (4.0 * b2 - a2) / 3.0
        cols.append((a1, a2))
    row1 = np.stack([cols[0][0], cols[1][0]], axis=-1)
    row2 = np.stack([cols[0][1], cols[1][1]], axis=-1)
    return np.stack([row1, row2], axis=-2)


def cs_determinant_fd(z1, z2, s, z1p, eps0: float = EPS0_DEFAULT, **kw):
    _check_cs_domain(z1, z2, s, eps0)
    m = fd_cs_matrix(lambda a, b, c: model_phase(a, b, c, z1p), z1, z2, s, **kw)
    return _out(np.linalg.det(m))


def cs_determinant(z, s, z1p, eps0: float = EPS0_DEFAULT, method: str = "closed"):
    """det M(phi) at z = (z1, z2) with z1 > 0; ``method`` is closed or fd."""
    z = np.asarray(z, dtype=float)
    if method == "closed":
        return cs_determinant_closed(z[..., 0], z[..., 1], s, z1p, eps0)
    if method == "fd":
        return cs_determinant_fd(z[..., 0], z[..., 1], s, z1p, eps0)
    raise ValueError("method must be closed or fd")


def full_phase(j: int, z1p: float):
    """Phi*_{j, z1'}(z, s) = Phi*_j((z1' - z1, z2), (z1', s)) as f(z1, z2, s)."""

    def f(z1, z2, s):
        z = np.stack(np.broadcast_arrays(z1p - z1, z2), axis=-1)
        zp = np.stack(np.broadcast_arrays(z1p + 0.0 * z1, s), axis=-1)
        tj, _, q, _ = _scaled_core(j, z, zp)
        return -(2.0 ** (1.5 * j)) * q + cross_term(z, zp)

    return f


def cs_condition_full(j: int, z1p: float = 0.0, *, b: float = B_DEFAULT, eps0: float = EPS0_DEFAULT,
                      count: int = 1024, seed: int = 0, h: float = 2.0**-6):
    """det M(Phi*_{j, z1'}) over z1 in [b - eps0, b + eps0], |z2|, |s| <= eps0.

    Passes when min |det| >= 1/16.
    """
    from .operator_lab import ScanReport

    m = int(math.ceil(math.log2(max(count, 2))))
    u = qmc.Sobol(3, scramble=True, seed=seed).random_base2(m)[:count]
    z1 = b + (2.0 * u[:, 0] - 1.0) * eps0
    z2 = (2.0 * u[:, 1] - 1.0) * eps0
    s = (2.0 * u[:, 2] - 1.0) * eps0
    dets = np.linalg.det(fd_cs_matrix(full_phase(j, z1p), z1, z2, s, h_s=h, h_z=h))
    dev = np.abs(dets - 0.125)
    mn = float(np.min(np.abs(dets)))
    return ScanReport("cs-condition", {"j": j, "z1p": z1p, "b": b, "eps0": eps0, "count": count},
                      [float(j)], [mn], math.nan, math.nan, math.nan, 0.125, 0.0625, bool(mn >= 0.0625), seed,
                      extra={"min_abs_det": mn, "max_dev": float(dev.max()), "mean_det": float(dets.mean())})


def degeneracy_profile(r):
    """Unscaled Hessian 2 cos S_c / sin S_c; tends to 0 as r -> 2."""
    sc = np.asarray(stationary_point_r(r))
    return _out(d2phase_r2(sc, np.asarray(r) ** 2))


# ---------------------------------------------------------------------------
# rescaled local operators


def patch_operator(j: int, lam: float, cap: bool = False, n: int = 24, *, b: float = B_DEFAULT,
                   eps0: float = EPS0_DEFAULT):
    """Rescaled local operator on U and its prefactor 2^(-3j/2).

    Kernel exp(i 2^(-3j/2) lambda Phi*) times the scaled amplitude, psi(t~_j)
    and product bumps on both patches; with ``cap`` the angular cap around e_1
    is included.  Returns (operator, factor).
    """
    src = Grid2D(-eps0, eps0, -eps0, eps0, n, n)
    tgt = Grid2D(-b - eps0, -b + eps0, -eps0, eps0, n, n)
    z, zp = tgt.points()[:, None, :], src.points()[None, :, :]
    g = scaled_geometry(j, z, zp, b, eps0, check=False)
    amp = scaled_amplitude(j, z, zp) * co.psi(g.t_tilde_j)
    bump = lambda p, c: co.compact_bump((p[..., 0] - c) / eps0) * co.compact_bump(p[..., 1] / eps0)
    amp = amp * bump(z, -b) * bump(zp, 0.0)
    if cap:
        w, wp = L_j(j, z, zp)
        d = w - wp
        amp = amp * co.angular_bump_angle(0.0, j, eps0, np.arctan2(d[..., 1], d[..., 0]))
    lam_eff = lam * 2.0 ** (-1.5 * j)
    kern = amp * np.exp(1j * lam_eff * g.Phi_star)
    return DenseOperator.on_grids(kern, src, tgt), 2.0 ** (-1.5 * j)
