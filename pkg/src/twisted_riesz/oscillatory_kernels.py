"""Oscillatory integrals [eta]^lambda and their decomposed pieces.

    [eta]^lambda(z, z') = int eta(t) (sin t)^-1 exp(i lambda P(t, z, z')) dt

The cross term of P factors out as exp(i lambda S(z, z')), so every kernel is
computed as a radial factor F(|z - z'|^2) evaluated once per distinct squared
distance.  Quadrature uses composite 16-point Gauss panels whose widths keep
the phase change per panel below a budget (default 1/2 radian), refined near
stationary points by the second derivative and near zeros of sin t by the
amplitude.

Optionally the time runs along t - i eps B(t).  With B = 1 and a window that
extends analytically (``WindowedSymbol.analytic``) the integral is unchanged by
Cauchy's theorem; with a non-analytic window the shift regularizes the
(sin t)^-1 singularity.  A local profile B (``contour``) supported where the
non-analytic factor of the window is constant also leaves the integral exact;
this handles windows that contain t = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_jacobi

from . import cutoffs as co
from .discretization import DenseOperator, Grid2D, TwistedConvolution
from .propagator import C_PROPAGATOR, SingularTimeError, cross_term, dist2
from .quadrature import BudgetExceededError, budget_breaks, composite_nodes, uniform_breaks

PHASE_BUDGET = 0.5
MAX_PANELS = 2_000_000
ENVELOPE_N = 3
NEGLIGIBLE_EXPONENT = 60.0
C0_DEFAULT = 6


# ---------------------------------------------------------------------------
# Fourier transform of the dyadic Riesz pieces


def _psi_moment_nodes(delta: float, omega_max: float):
    """Nodes/weights for int_{1/4}^{1} u^delta psi(u) g(u) du (breaks at 1/2 where psi's formula switches)."""
    width = min(1.0 / 32.0, math.pi / max(omega_max, 1.0))
    br = np.concatenate([uniform_breaks(0.25, 0.5, width)[:-1], uniform_breaks(0.5, 1.0, width)])
    u, w = composite_nodes(br, 16)
    return u, w * u**delta * co.psi(u)


def _tail_moment_nodes(delta: float, omega_max: float):
    """Nodes/weights for int_0^1 s^delta tail(s) g(s) ds, Gauss-Jacobi on [0, 1/2]."""
    n = int(max(24, math.ceil(0.5 * omega_max / 2.0 + 24)))
    x, wj = roots_jacobi(n, 0.0, delta)
    s0 = 0.25 * (1.0 + x)  # [0, 1/2]; s^delta = 4^-delta (1 + x)^delta
    w0 = wj * 0.25 * 4.0**-delta
    width = min(1.0 / 32.0, math.pi / max(omega_max, 1.0))
    s1, w1 = composite_nodes(uniform_breaks(0.5, 1.0, width), 16)
    w1 = w1 * s1**delta * co.psi_tail(s1)
    return np.concatenate([s0, s1]), np.concatenate([w0, w1])


def hat_psi_ell_delta(ell: int, delta: float, t, *, chunk: int = 4096):
    """int psi_l^delta(s) exp(-i s t) ds; t may be complex (entire function of t)."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    t = np.asarray(t)
    tt = np.asarray(t, dtype=complex).ravel()
    scale = 2.0**ell if ell >= 1 else 1.0
    omega = scale * tt
    omax = float(np.max(np.abs(omega.real))) if omega.size else 0.0
    if ell >= 1:
        u, w = _psi_moment_nodes(delta, omax)
    else:
        u, w = _tail_moment_nodes(delta, omax)
    out = np.empty(tt.size, dtype=complex)
    for i in range(0, tt.size, chunk):
        out[i : i + chunk] = np.exp(-1j * omega[i : i + chunk, None] * u[None, :]) @ w
    out *= scale
    if not np.iscomplexobj(t) and np.ndim(t) == 0:
        return complex(out[0])
    return out.reshape(t.shape) if np.ndim(t) else complex(out[0])


def hat_psi_truncation(ell: int, delta: float, rel_tol: float = 1e-9) -> float:
    """Half-width T beyond which |hat psi_l^delta| < rel_tol |hat psi_l^delta(0)| (sampled)."""
    scale = 2.0**ell
    w = np.linspace(0.0, 4000.0, 8001)
    vals = np.abs(hat_psi_ell_delta(ell, delta, w / scale))
    ok = np.nonzero(vals > rel_tol * vals[0])[0]
    return (w[ok[-1]] + 1.0) / scale


@dataclass(frozen=True)
class HatPsiTable:
    """hat psi_l^delta on the line Im t = -eps, tabulated by FFT and interpolated by cubic splines.

    psi_l^delta is smooth and compactly supported (l >= 1), so the trapezoid
    rule on a uniform s-grid is spectrally accurate and one FFT gives the
    transform on a uniform t-grid.  The splines interpolate the demodulated
    transform exp(i m t) hat psi(t), m the centre of the support, which varies
    on the scale of the inverse support width.
    """

    ell: int
    delta: float
    eps: float
    half_width: float
    dt: float = 2.0**-8

    def __post_init__(self):
        from scipy.interpolate import CubicSpline

        if self.ell < 1:
            raise ValueError("tabulation needs ell >= 1 (psi_0^delta is not smooth at 0)")
        lo, hi = 2.0**self.ell / 4.0, 2.0**self.ell
        period = 2.0 * math.pi / self.dt  # length of the s-window
        if period < 2.0 * hi:
            raise ValueError("dt too coarse for the support")
        ds = (hi - lo) / 8192.0
        m = int(2 ** math.ceil(math.log2(period / ds)))
        ds = period / m
        s = np.arange(m) * ds
        f = co.psi_ell_delta(self.ell, self.delta, s) * np.exp(-s * self.eps)
        spec = np.fft.fft(f) * ds  # spec[k] = sum f(s) exp(-i s t_k), t_k = k dt
        n = int(math.ceil(self.half_width / self.dt)) + 4
        k = np.arange(-n, n + 1)
        t = k * self.dt
        vals = spec[k % m]
        mid = 0.5 * (lo + hi)
        g = vals * np.exp(1j * mid * t)
        object.__setattr__(self, "_mid", mid)
        object.__setattr__(self, "_re", CubicSpline(t, g.real))
        object.__setattr__(self, "_im", CubicSpline(t, g.imag))

    def __call__(self, t):
        t = np.real(np.asarray(t))
        return (self._re(t) + 1j * self._im(t)) * np.exp(-1j * self._mid * t)


# ---------------------------------------------------------------------------
# windows


Interval = tuple[float, float]


@dataclass(frozen=True)
class WindowedSymbol:
    """A time window eta together with lambda and decomposition indices.

    ``support`` lists disjoint intervals outside which eta vanishes; ``scale``
    is the smallest feature length of eta and ``freq`` its oscillation
    frequency (both only steer panel sizes).
    """

    eta: Callable[[np.ndarray], np.ndarray]
    support: tuple[Interval, ...]
    lam: float
    scale: float = 0.05
    freq: float = 0.0
    eps: float = 0.0
    analytic: bool = False
    indices: dict = field(default_factory=dict)
    label: str = ""
    analytic_factor: Callable | None = None
    contour: tuple[float, float, float] | None = None  # (center, flat, outer) of the profile B

    def __post_init__(self):
        sup = tuple((float(a), float(b)) for a, b in self.support)
        object.__setattr__(self, "support", sup)
        for a, b in sup:
            if not b > a:
                raise ValueError("empty support interval")

    def __call__(self, t):
        t = np.asarray(t)
        out = self.eta(t)
        if self.analytic_factor is not None:
            out = out * self.analytic_factor(t)
        return out

    def profile(self, t):
        """B(t) and B'(t) of the contour t - i eps B(t)."""
        t = np.asarray(t, dtype=float)
        if self.contour is None:
            return np.ones_like(t), np.zeros_like(t)
        c, flat, outer = self.contour
        return contour_profile(t - c, flat, outer)

    def on_contour(self, t):
        """(tau, dtau/dt, window values) at the real parameters t."""
        t = np.asarray(t, dtype=float)
        if self.eps > 0:
            b, db = self.profile(t)
            tau = t - 1j * self.eps * b
            dtau = 1.0 - 1j * self.eps * db
        else:
            tau, dtau = t.astype(complex), np.ones_like(t, dtype=complex)
        vals = self.eta(tau) if self.analytic else self.eta(t)
        if self.analytic_factor is not None:
            vals = vals * self.analytic_factor(tau)
        return tau, dtau, vals

    def with_lambda(self, lam: float) -> "WindowedSymbol":
        return replace(self, lam=float(lam))

    def times(self, fn, *, support: Sequence[Interval] | None = None, scale: float | None = None,
              freq: float = 0.0, label: str = "", **indices) -> "WindowedSymbol":
        """Product window eta * fn, restricted to ``support`` when given."""
        base = self.eta
        sup = self.support if support is None else _intersect(self.support, support)
        idx = dict(self.indices)
        idx.update(indices)
        return replace(
            self,
            eta=lambda t: base(t) * fn(np.real(t)),
            support=sup,
            scale=min(self.scale, scale if scale is not None else self.scale),
            freq=self.freq + freq,
            analytic=False if self.analytic_factor is None else self.analytic,
            indices=idx,
            label=(self.label + "*" + label) if label else self.label,
        )

    # constructors -----------------------------------------------------------

    @classmethod
    def interval(cls, a: float, b: float, lam: float, **kw) -> "WindowedSymbol":
        return cls(lambda t: co.interval_bump(a, b, np.real(t)), ((a, b),), lam,
                   scale=(b - a) / 8.0, label=f"bump({a:.6g},{b:.6g})", **kw)

    @classmethod
    def eta_rho(cls, rho: float, lam: float, **kw) -> "WindowedSymbol":
        return cls(lambda t: co.eta_rho(rho, np.real(t)), ((-rho, -rho / 4.0), (rho / 4.0, rho)), lam,
                   scale=rho / 16.0, indices={"rho": rho}, label=f"eta_rho({rho:.6g})", **kw)

    @classmethod
    def from_cutoff(cls, family: co.CutoffFamily, lam: float, scale: float = 0.05, **kw) -> "WindowedSymbol":
        lo, hi = family.spec().support
        return cls(lambda t: family(np.real(t)), ((lo, hi),), lam, scale=scale, label=family.kind, **kw)

    @classmethod
    def hat_psi(cls, ell: int, delta: float, lam: float, *, eps: float = 0.3, half_width: float | None = None,
                rel_tol: float = 1e-9) -> "WindowedSymbol":
        """hat psi_l^delta on [-T, T], evaluated on the contour t - i eps (exact shift; ell >= 1)."""
        T = hat_psi_truncation(ell, delta, rel_tol) if half_width is None else half_width
        table = HatPsiTable(ell, delta, eps, T)
        return cls(table, ((-T, T),), lam, scale=2.0**-ell / 4.0, freq=2.0**ell, eps=eps, analytic=True,
                   indices={"ell": ell, "delta": delta}, label=f"hat_psi({ell},{delta:.6g})")


def _intersect(a: Sequence[Interval], b: Sequence[Interval]) -> tuple[Interval, ...]:
    out = []
    for a0, a1 in a:
        for b0, b1 in b:
            lo, hi = max(a0, b0), min(a1, b1)
            if hi > lo:
                out.append((lo, hi))
    return tuple(out)


def contour_profile(t, flat: float, outer: float):
    """Even plateau B (1 on |t| <= flat, 0 for |t| >= outer) and its derivative."""
    t = np.asarray(t, dtype=float)
    x = (np.abs(t) - flat) / (outer - flat)
    b = 1.0 - co.smooth_step(x)
    db = np.zeros_like(t)
    m = (x > 0) & (x < 1)
    xm = x[m]
    ea, eb = np.exp(-1.0 / xm), np.exp(-1.0 / (1.0 - xm))
    ds = (ea / xm**2 * eb + ea * eb / (1.0 - xm) ** 2) / (ea + eb) ** 2
    db[m] = -ds * np.sign(t[m]) / (outer - flat)
    return b, db


# local contour inside the plateau of eta_0, depth eps
ETA0_CONTOUR = (0.0, 0.4 * co.ETA0_FLAT, 0.9 * co.ETA0_FLAT)
ETA0_CONTOUR_EPS = 0.25 * co.ETA0_FLAT


def eta_eta_psi_window(base: str, ell: int, delta: float, n: int, lam: float, *, eps: float | None = None,
                       translate_base: bool = False) -> WindowedSymbol:
    """Windows eta_k hat psi_l^delta(. - n pi) (or eta_k(. + n pi) hat psi_l^delta when ``translate_base``).

    For eta_0 the time runs along a local contour inside the plateau of eta_0,
    which is exact because hat psi is entire; eps = 0 disables it.
    """
    if base == "eta0":
        fn, sup = co.eta0, (-co.ETA0_OUTER, co.ETA0_OUTER)
    elif base == "eta1":
        fn, sup = co.eta1, (0.0, math.pi)
    else:
        raise ValueError("base must be eta0 or eta1")
    shift = n * math.pi
    if translate_base:
        eta = lambda t: fn(np.real(t) + shift)
        psi_hat = lambda tau: hat_psi_ell_delta(ell, delta, tau)
        support = ((sup[0] - shift, sup[1] - shift),)
    else:
        eta = lambda t: fn(np.real(t))
        psi_hat = lambda tau: hat_psi_ell_delta(ell, delta, tau - shift)
        support = (sup,)
    contour = None
    if base == "eta0":
        eps = ETA0_CONTOUR_EPS if eps is None else eps
        contour = (-shift if translate_base else 0.0,) + ETA0_CONTOUR[1:]
    else:
        eps = 0.0 if eps is None else eps
    scale = min(co.ETA0_OUTER - co.ETA0_FLAT, 2.0**-ell) / 4.0
    return WindowedSymbol(eta, support, lam, scale=scale, freq=2.0**ell, eps=eps, analytic_factor=psi_hat,
                          contour=contour, indices={"ell": ell, "delta": delta, "n": n, "base": base},
                          label=f"{base}*hat_psi({ell})(.-{n}pi)")


# ---------------------------------------------------------------------------
# quadrature


def _group_r2(keys: np.ndarray, max_size: int = 48, rel: float = 0.02, abs_: float = 1e-3):
    groups, start = [], 0
    for i in range(1, len(keys) + 1):
        if i == len(keys) or i - start >= max_size or keys[i] > keys[start] * (1 + rel) + abs_:
            groups.append((start, i))
            start = i
    return groups


def _panel_breaks(w: WindowedSymbol, a: float, b: float, lo: float, hi: float, budget: float, max_panels: int):
    lam = w.lam

    def step(t):
        y = w.eps * w.profile(t)[0]
        s2 = np.maximum(np.sin(t) ** 2 + np.sinh(y) ** 2, 1e-30)
        rate = lam * np.maximum(np.abs(1.0 - lo / (4.0 * s2)), np.abs(1.0 - hi / (4.0 * s2)))
        curv = lam * hi * np.abs(np.cos(t)) / (2.0 * s2**1.5) + lam * hi * 1e-300
        # largest h with rate h + curv h^2 / 2 <= budget
        h = 2.0 * budget / (rate + np.sqrt(rate * rate + 2.0 * curv * budget) + 1e-300)
        h = np.minimum(h, 0.5 * np.sqrt(s2))
        h = np.minimum(h, w.scale)
        if w.contour is not None and w.eps > 0:
            h = np.minimum(h, (w.contour[2] - w.contour[1]) / 8.0)
        if w.freq > 0:
            h = np.minimum(h, budget / w.freq)
        # off the real axis exp(i lambda r^2 cot(tau) / 4) is damped; skip resolving it there
        damp = 0.25 * lam * lo * np.sinh(2.0 * y) / (np.cosh(2.0 * y) - np.cos(2.0 * t) + 1e-300) - lam * y
        return np.where(damp > NEGLIGIBLE_EXPONENT, w.scale, h)

    return budget_breaks(a, b, step, max_panels=max_panels)


def _check_zeros_of_sin(w: WindowedSymbol):
    """The real-axis integral diverges where eta(k pi) != 0 unless the contour leaves the axis there."""
    for a, b in w.support:
        for k in range(int(math.ceil(a / math.pi)), int(math.floor(b / math.pi)) + 1):
            t = np.array([k * math.pi])
            if abs(w(t)[0]) > 0 and not w.eps * w.profile(t)[0][0] > 0:
                raise SingularTimeError(f"window is nonzero at t = {k} pi; request eps > 0")


def bracket_kernel_r2(w: WindowedSymbol, r2, *, budget: float = PHASE_BUDGET, order: int = 16,
                      max_panels: int = MAX_PANELS, node_chunk: int = 1 << 15) -> np.ndarray:
    """Radial factor F(r^2) with [eta]^lambda(z, z') = F(|z-z'|^2) exp(i lambda S(z, z'))."""
    r2 = np.asarray(r2, dtype=float)
    _check_zeros_of_sin(w)
    keys, inv = np.unique(r2.ravel(), return_inverse=True)
    out = np.zeros(keys.size, dtype=complex)
    lam = w.lam
    for g0, g1 in _group_r2(keys):
        lo, hi = keys[g0], keys[g1 - 1]
        acc = np.zeros(g1 - g0, dtype=complex)
        for a, b in w.support:
            br = _panel_breaks(w, a, b, lo, hi, budget, max_panels)
            t, wt = composite_nodes(br, order)
            tau, dtau, eta_vals = w.on_contour(t)
            s = np.sin(tau)
            if np.any((np.abs(s) < 1e-14) & (eta_vals != 0)):
                raise SingularTimeError("window meets a zero of sin t; request eps > 0")
            with np.errstate(divide="ignore", invalid="ignore"):
                amp = np.where(eta_vals != 0, wt * dtau * eta_vals / s * np.exp(1j * lam * tau), 0.0)
                cot4 = np.where(eta_vals != 0, 0.25j * lam * np.cos(tau) / s, 0.0)
            keep = amp != 0
            amp, cot4 = amp[keep], cot4[keep]
            for i in range(0, amp.size, node_chunk):
                acc += np.exp(cot4[i : i + node_chunk, None] * keys[None, g0:g1]).T @ amp[i : i + node_chunk]
        out[g0:g1] = acc
    return out[inv].reshape(r2.shape)


def bracket_kernel(w: WindowedSymbol, z, zp, **kw):
    """[eta]^lambda(z, z') by phase-budget Gauss quadrature."""
    f = bracket_kernel_r2(w, dist2(z, zp), **kw)
    out = f * np.exp(1j * w.lam * cross_term(z, zp))
    return out if np.ndim(out) else complex(out)


def bracket_kernel_certified(w: WindowedSymbol, z, zp, **kw):
    """Value and the change when the phase budget is halved."""
    budget = kw.pop("budget", PHASE_BUDGET)
    a = bracket_kernel(w, z, zp, budget=budget, **kw)
    b = bracket_kernel(w, z, zp, budget=0.5 * budget, **kw)
    return b, np.abs(a - b)


def window_fourier(w: WindowedSymbol, s, *, order: int = 16) -> np.ndarray:
    """eta-check(s) = int eta(t) e^{i t s} dt for real s."""
    s = np.asarray(s, dtype=float)
    smax = float(np.max(np.abs(s))) if s.size else 0.0
    out = np.zeros(s.shape, dtype=complex)
    for a, b in w.support:
        width = min(w.scale / 4.0, 0.5 / max(smax + w.freq, 1.0))
        t, wt = composite_nodes(uniform_breaks(a, b, width), order)
        ev = wt * w(t)
        flat, res = s.ravel(), out.reshape(-1)
        step = max(1, (1 << 22) // max(t.size, 1))
        for i in range(0, flat.size, step):
            res[i : i + step] += np.exp(1j * np.multiply.outer(flat[i : i + step], t)) @ ev
    return out


def window_l1(w: WindowedSymbol, order: int = 16) -> float:
    total = 0.0
    for a, b in w.support:
        t, wt = composite_nodes(uniform_breaks(a, b, w.scale / 4.0), order)
        total += float(np.sum(wt * np.abs(w(t))))
    return total


# ---------------------------------------------------------------------------
# decomposition into distance-to-sphere and time pieces


def l_window(l: int, tail: bool = False):
    """phi~_l(pi/2 - t), or the tail sum over l' >= l when ``tail``."""
    if tail:
        return lambda t: co.dyadic_sum(np.abs(math.pi / 2 - np.real(t)), l, math.inf)
    return lambda t: co.psi(2.0**l * np.abs(math.pi / 2 - np.real(t)))


def decomposed_kernel_r2(w: WindowedSymbol, piece, r2, *, j_max: int | None = None, **kw):
    """Radial factor of one piece of [eta]^lambda.

    ``piece`` is one of ("j", j), ("circ",), ("ext",), ("jl", j, l) or ("jl-tail", j, l).
    The ("jl", j, l) pieces use the window eta phi~_l(pi/2 - .); ("jl-tail", j, l)
    uses eta times the sum over l' >= l, so that the pieces for l_min <= l < L
    together with ("jl-tail", j, L) re-sum to ("j", j).
    """
    r2 = np.asarray(r2, dtype=float)
    r = np.sqrt(r2)
    jm = co.j0_of_lambda(w.lam) if j_max is None else j_max
    kind = piece[0]
    if kind == "j":
        j = int(piece[1])
        if not 0 <= j <= jm:
            raise ValueError("j out of range")
        return co.chi_j(j, r) * bracket_kernel_r2(w, r2, **kw)
    if kind in ("circ", "ext"):
        _, circ, ext = co.chi_split_r(jm, r)
        return (circ if kind == "circ" else ext) * bracket_kernel_r2(w, r2, **kw)
    if kind in ("jl", "jl-tail"):
        j, l = int(piece[1]), int(piece[2])
        lo = 2.0 ** -(l + 2)
        hi = 2.0**-l if kind == "jl" else 2.0**-l
        sup = ((math.pi / 2 - hi, math.pi / 2 - (lo if kind == "jl" else 0.0)),
               (math.pi / 2 + (lo if kind == "jl" else 0.0), math.pi / 2 + hi))
        if kind == "jl-tail":
            sup = ((math.pi / 2 - hi, math.pi / 2 + hi),)
        wl = w.times(l_window(l, tail=(kind == "jl-tail")), support=sup, scale=2.0 ** -(l + 2) / 4.0,
                     label=f"l{l}")
        if not wl.support:
            return np.zeros(r2.shape, dtype=complex)
        return co.chi_j(j, r) * bracket_kernel_r2(wl, r2, **kw)
    raise ValueError(f"unknown piece {piece!r}")


def decomposed_kernel(w: WindowedSymbol, piece, z, zp, **kw):
    f = decomposed_kernel_r2(w, piece, dist2(z, zp), **kw)
    out = f * np.exp(1j * w.lam * cross_term(z, zp))
    return out if np.ndim(out) else complex(out)


def all_pieces(w: WindowedSymbol, *, j_max: int | None = None) -> list[tuple]:
    jm = co.j0_of_lambda(w.lam) if j_max is None else j_max
    return [("j", j) for j in range(jm + 1)] + [("circ",), ("ext",)]


# ---------------------------------------------------------------------------
# envelopes


@dataclass(frozen=True)
class KernelEnvelope:
    family: str  # b_l | K_j | exterior
    N: int = ENVELOPE_N
    M: int = 0
    ell: int = 0
    j: int = 0
    l: int = 0
    n: int = 0

    def __post_init__(self):
        if self.family not in ("b_l", "K_j", "exterior"):
            raise ValueError("unknown envelope family")

    def value(self, lam: float, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.family == "exterior":
            return (1.0 + lam * (r * r - 4.0)) ** -self.N
        if self.family == "b_l":
            m = max(2.0**-self.j, 2.0 ** (-2 * self.l))
            return np.full(r.shape, 2.0**-self.l * (1.0 + lam * 2.0**-self.l * m) ** -self.N)
        return 2.0 ** (self.ell - self.j) * (1.0 + lam * 2.0**self.j * r * r) ** -self.N


def envelope_window(env: KernelEnvelope, lam: float, base: WindowedSymbol | None = None) -> WindowedSymbol:
    """The window whose kernel each envelope family bounds."""
    if env.family == "exterior":
        return (base or WindowedSymbol.interval(math.pi / 4, 3 * math.pi / 4, lam)).with_lambda(lam)
    if env.family == "b_l":
        w = (base or WindowedSymbol.interval(0.2, math.pi - 0.2, lam)).with_lambda(lam)
        lo, hi = 2.0 ** -(env.l + 2), 2.0**-env.l
        sup = ((math.pi / 2 - hi, math.pi / 2 - lo), (math.pi / 2 + lo, math.pi / 2 + hi))
        return w.times(l_window(env.l), support=sup, scale=lo / 4.0, label=f"l{env.l}")
    w = eta_eta_psi_window("eta0", env.ell, 0.5, env.n, lam)
    lo, hi = 2.0 ** -(env.j + 2), 2.0**-env.j
    return w.times(lambda t: co.psi(2.0**env.j * np.abs(np.real(t))), support=((-hi, -lo), (lo, hi)),
                   scale=lo / 4.0, label=f"phi~{env.j}")


def envelope_kernel(env: KernelEnvelope, lam: float, r, base: WindowedSymbol | None = None) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    w = envelope_window(env, lam, base)
    f = bracket_kernel_r2(w, r * r)
    if env.family == "exterior":
        _, _, ext = co.chi_split_r(co.j0_of_lambda(lam), r)
        return ext * f
    if env.family == "b_l":
        return co.chi_j(env.j, r) * f
    return f


def envelope_samples(env: KernelEnvelope, count: int = 24) -> np.ndarray:
    """Default sample radii inside the regime of each bound."""
    if env.family == "exterior":
        return np.array([2.5])
    if env.family == "b_l":
        u = np.linspace(2.0 ** -(env.j - 2) * 0.26, 2.0 ** -(env.j - 2) * 0.99, count)
        return 2.0 - u
    return np.linspace(0.5, 1.5, count)


def envelope_check(env: KernelEnvelope, lams: Sequence[float], samples=None, *, factor: float = 4.0,
                   base: WindowedSymbol | None = None):
    """Empirical constants sup |kernel| / envelope for each lambda, with a stability verdict.

    The bound holds with a lambda-independent constant if the constant does not
    grow; the verdict requires C(lambda_{k+1}) <= factor * C(lambda_k) for every
    consecutive pair (a decreasing constant is consistent with the bound).
    """
    from .operator_lab import ScanReport, fit_slope

    r = envelope_samples(env) if samples is None else np.asarray(samples, dtype=float)
    consts = []
    for lam in lams:
        k = np.abs(envelope_kernel(env, lam, r, base))
        e = env.value(lam, r)
        consts.append(float(np.max(k / e)))
    ratios = [b / a if a > 0 else (0.0 if b == 0 else math.inf) for a, b in zip(consts, consts[1:])]
    passed = all(q <= factor for q in ratios)
    pos = [c for c in consts if c > 0]
    if len(pos) == len(consts) and len(consts) > 1:
        slope, icpt, res = fit_slope(np.log(np.asarray(lams, float)), np.log(consts))
    else:
        slope = icpt = res = float("nan")
    spread = (max(consts) / min(consts)) if min(consts) > 0 else math.inf
    return ScanReport(
        experiment=f"envelope-{env.family}",
        params={"N": env.N, "ell": env.ell, "j": env.j, "l": env.l, "n": env.n, "samples": int(r.size)},
        x=[float(v) for v in lams],
        values=consts,
        slope=slope,
        intercept=icpt,
        residual=res,
        target=0.0,
        tolerance=factor,
        passed=passed,
        seed=0,
        extra={"consecutive_ratios": ratios, "two_sided_spread": spread},
    )


# ---------------------------------------------------------------------------
# operators on grids


def kernel_operator(w: WindowedSymbol, grid: Grid2D, *, cutoff=None, **kw) -> TwistedConvolution:
    """Twisted-convolution discretization of [eta]^lambda (times an optional radial cutoff of r)."""

    def fac(r2):
        f = bracket_kernel_r2(w, r2, **kw)
        if cutoff is not None:
            f = f * cutoff(np.sqrt(r2))
        return f

    return TwistedConvolution.from_radial(grid, fac, 0.5 * w.lam)


def tile_index(points: np.ndarray, side: float = 0.5) -> np.ndarray:
    return np.floor(points / side).astype(np.int64)


def tiles_adjacent(ti: np.ndarray, tj: np.ndarray) -> np.ndarray:
    """Closed squares of a lattice tiling touch iff their indices differ by at most 1 per axis."""
    d = np.abs(ti - tj)
    return (d[..., 0] <= 1) & (d[..., 1] <= 1)


def tile_neighbors(index: tuple[int, int]) -> list[tuple[int, int]]:
    i, k = index
    return [(i + a, k + b) for a in (-1, 0, 1) for b in (-1, 0, 1) if (a, b) != (0, 0)]


def tiling_split(lam: float, ell: int, n: int, grid: Grid2D, *, delta: float = 0.5, eps: float | None = None,
                 side: float = 0.5, base: str = "eta0"):
    """Near (adjacent tiles) and far parts of [eta hat psi_l^delta(. - n pi)]^lambda as dense operators."""
    w = eta_eta_psi_window(base, ell, delta, n, lam, eps=eps)
    pts = grid.points()
    r2 = dist2(pts[:, None, :], pts[None, :, :])
    full = bracket_kernel_r2(w, r2) * np.exp(1j * lam * cross_term(pts[:, None, :], pts[None, :, :]))
    ti = tile_index(pts, side)
    near = tiles_adjacent(ti[:, None, :], ti[None, :, :])
    i1 = DenseOperator.on_grids(np.where(near, full, 0.0), grid, grid)
    i2 = DenseOperator.on_grids(np.where(near, 0.0, full), grid, grid)
    return i1, i2, DenseOperator.on_grids(full, grid, grid)
