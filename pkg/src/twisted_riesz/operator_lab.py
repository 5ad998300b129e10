"""Operator norm brackets and the scaling and convergence experiments.

Norms are taken between weighted L^p spaces of the source and target grids.
Lower bounds come from a fixed-point ascent on ||Tf||_q / ||f||_p (restarted
from seeded random fields, the best witness is kept); upper bounds use the
exact p = 1, 2, infinity norms of the discretized operator and Riesz-Thorin
interpolation between them.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, svds
from scipy.special import j0

from . import cutoffs as co
from .discretization import (
    DenseOperator,
    DiscreteOperator,
    Grid2D,
    LowRankOperator,
    RadialGrid,
    SampledField,
    TwistedConvolution,
    discretize,
    lp_norm,
)
from .propagator import C_PROPAGATOR
from .quadrature import composite_nodes, uniform_breaks

__all__ = [
    "NormEstimate",
    "ScanReport",
    "discretize",
    "fit_slope",
    "opnorm_bracket",
    "scaling_scan",
    "convergence_experiment",
]

DENSE_SVD_LIMIT = 2500
LAM_CAP_QUADRATURE = 2.0**14
LAM_CAP_EIGENSUM = 129
WIDTH_PROBE_MAX = 2.0**16


class AscentStallError(RuntimeError):
    """The ascent did not converge; ``estimate`` carries the best witness."""

    def __init__(self, msg: str, estimate: "NormEstimate"):
        super().__init__(msg)
        self.estimate = estimate


# ---------------------------------------------------------------------------
# records


@dataclass
class NormEstimate:
    """Bracket lower <= ||T||_{p -> q} <= upper; ``witness`` attains ``lower``."""

    p: float
    lower: float
    upper: float
    restarts: int
    seed: int
    q: float | None = None
    witness: np.ndarray | None = field(default=None, repr=False)
    iterations: int = 0
    stalled: bool = False

    @property
    def ratio(self) -> float:
        if self.lower == 0.0:
            return 1.0 if self.upper == 0.0 else math.inf
        return self.upper / self.lower

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "witness"}
        d["ratio"] = self.ratio
        return d


def fit_slope(x, y) -> tuple[float, float, float]:
    """Least-squares line y = slope x + intercept; residual is the RMS misfit."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return float("nan"), float("nan"), float("nan")
    slope, intercept = np.polyfit(x, y, 1)
    res = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), float(intercept), res


@dataclass
class ScanReport:
    """One scaling experiment: abscissae, measured values and the log-log fit."""

    experiment: str
    params: dict
    x: list
    values: list
    slope: float
    intercept: float
    residual: float
    target: float
    tolerance: float
    passed: bool
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def refit(self) -> tuple[float, float, float]:
        return fit_slope(np.log(np.asarray(self.x, float)), np.log(np.asarray(self.values, float)))

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ScanReport":
        return cls(**d)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    return v


def _loglog_report(experiment, params, x, values, target, tolerance, seed, *, upper_only=True, extra=None):
    x = [float(v) for v in x]
    values = [float(v) for v in values]
    if all(v > 0 for v in values):
        slope, icpt, res = fit_slope(np.log(x), np.log(values))
    else:
        slope = icpt = res = float("nan")
    passed = bool(slope <= target + tolerance) if upper_only else bool(abs(slope - target) <= tolerance)
    return ScanReport(experiment, params, x, values, slope, icpt, res, target, tolerance, passed, seed,
                      extra or {})


# ---------------------------------------------------------------------------
# exact norms of discretized operators


def _abs_row_sums(T: DiscreteOperator) -> np.ndarray:
    if hasattr(T, "abs_row_sums"):
        return T.abs_row_sums()
    return np.abs(T.to_dense()) @ T.src_weights


def _abs_col_sums(T: DiscreteOperator) -> np.ndarray:
    if isinstance(T, TwistedConvolution):
        return T.adjoint().abs_row_sums()
    if isinstance(T, DenseOperator):
        return T.tgt_weights @ np.abs(T.matrix)
    return T.tgt_weights @ np.abs(T.to_dense())


def norm_inf(T: DiscreteOperator) -> float:
    """||T||_{inf -> inf}: the largest weighted absolute row sum."""
    r = _abs_row_sums(T)
    return float(r.max()) if r.size else 0.0


def norm_1(T: DiscreteOperator) -> float:
    """||T||_{1 -> 1}: the largest weighted absolute column sum."""
    c = _abs_col_sums(T)
    return float(c.max()) if c.size else 0.0


def norm_2(T: DiscreteOperator) -> float:
    """||T||_{2 -> 2}: largest singular value of W_t^{1/2} K W_s^{1/2}."""
    m, n = T.shape
    sw, tw = np.sqrt(T.src_weights), np.sqrt(T.tgt_weights)
    if isinstance(T, LowRankOperator) and T.core.size < min(m, n):
        # W^1/2 L diag(c) R^T W^1/2 = Q_l (R_l diag(c) R_r^T) Q_r^T
        rl = np.linalg.qr(tw[:, None] * T.left, mode="r")
        rr = np.linalg.qr(sw[:, None] * T.right, mode="r")
        return float(np.linalg.svd((rl * T.core[None, :]) @ rr.T, compute_uv=False)[0])
    if min(m, n) <= DENSE_SVD_LIMIT or max(m, n) <= 2 * DENSE_SVD_LIMIT:
        a = tw[:, None] * T.to_dense() * sw[None, :]
        return float(np.linalg.svd(a, compute_uv=False)[0]) if a.size else 0.0
    op = LinearOperator(
        (m, n),
        matvec=lambda v: tw * T.matvec(np.ravel(v) / sw),
        rmatvec=lambda u: sw * T.rmatvec(np.ravel(u) / tw),
        dtype=complex,
    )
    s = svds(op, k=1, tol=1e-12, return_singular_vectors=False, random_state=0)
    return float(s[0])


def norm_2_to_inf(T: DiscreteOperator) -> tuple[float, np.ndarray]:
    """||T||_{2 -> inf} = max_i ||K[i, :]||_{L^2(w_s)} and its witness."""
    k = T.to_dense()
    rows = np.sqrt((np.abs(k) ** 2) @ T.src_weights)
    i = int(np.argmax(rows))
    if rows[i] == 0:
        return 0.0, np.zeros(T.shape[1], dtype=complex)
    return float(rows[i]), np.conj(k[i]) / rows[i]


def interpolation_upper(T: DiscreteOperator, p: float) -> float:
    """Riesz-Thorin bracket from the p = 1, 2, infinity norms."""
    if p == 2:
        return norm_2(T)
    if math.isinf(p):
        return norm_inf(T)
    if p == 1:
        return norm_1(T)
    if p > 2:
        theta = 2.0 / p
        return norm_2(T) ** theta * norm_inf(T) ** (1.0 - theta)
    theta = 2.0 - 2.0 / p
    return norm_2(T) ** theta * norm_1(T) ** (1.0 - theta)


# ---------------------------------------------------------------------------
# ascent


def _dual(v: np.ndarray, p: float) -> np.ndarray:
    """|v|^{p-2} v with 0 at zeros."""
    a = np.abs(v)
    out = np.zeros_like(v)
    m = a > 0
    out[m] = v[m] * a[m] ** (p - 2.0)
    return out


def _ascent(T, p, q, f, iterations, tol):
    ws = T.src_weights
    wt = T.tgt_weights
    pc = p / (p - 1.0)
    nf = lp_norm(f, ws, p)
    if nf == 0:
        return 0.0, f, 0, False
    f = f / nf
    best, best_f, prev = -1.0, f, -1.0
    it = 0
    converged = False
    for it in range(1, iterations + 1):
        g = T.matvec(f)
        val = lp_norm(g, wt, q)
        if val > best:
            best, best_f = val, f
        if val == 0:
            converged = True
            break
        if prev > 0 and abs(val - prev) <= tol * val:
            converged = True
            break
        prev = val
        h = T.rmatvec(_dual(g / val, q))
        fn = _dual(h, pc)
        nf = lp_norm(fn, ws, p)
        if nf == 0 or not np.isfinite(nf):
            break
        f = fn / nf
    return best, best_f, it, converged


def opnorm_lower(T: DiscreteOperator, p: float, q: float | None = None, *, restarts: int = 8, seed: int = 0,
                 iterations: int = 200, tol: float = 1e-12, starts: Sequence[np.ndarray] = ()):
    """Best ratio ||Tf||_q / ||f||_p over seeded ascents; returns (value, witness, iterations, stalled)."""
    q = p if q is None else q
    if not (1.0 < p < math.inf) or not (1.0 < q < math.inf):
        raise ValueError("ascent needs 1 < p, q < infinity")
    n = T.shape[1]
    rng = np.random.default_rng(seed)
    inits = [np.asarray(s, dtype=complex) for s in starts]
    for _ in range(restarts):
        inits.append(rng.standard_normal(n) + 1j * rng.standard_normal(n))
    best, witness, iters, stalled = 0.0, np.zeros(n, dtype=complex), 0, False
    for f0 in inits:
        val, f, it, conv = _ascent(T, p, q, f0, iterations, tol)
        iters += it
        if val > best:
            best, witness, stalled = val, f, not conv
    return best, witness, iters, stalled


def opnorm_bracket(T: DiscreteOperator, p: float, q: float | None = None, *, restarts: int = 8, seed: int = 0,
                   iterations: int = 200, tol: float = 1e-12, upper: bool = True,
                   starts: Sequence[np.ndarray] = ()) -> NormEstimate:
    """Lower and upper bounds for ||T||_{p -> q} (q defaults to p)."""
    q_eff = p if q is None else q
    if p < 1 or q_eff < 1:
        raise ValueError("p, q must be >= 1")
    if math.isinf(p) and math.isinf(q_eff):
        r = _abs_row_sums(T)
        i = int(np.argmax(r)) if r.size else 0
        val = float(r[i]) if r.size else 0.0
        k = T.to_dense()[i] if r.size else np.zeros(0)
        w = np.where(k != 0, np.conj(k) / np.where(k != 0, np.abs(k), 1.0), 0.0)
        return NormEstimate(p, val, val, 0, seed, q, w)
    if p == 2 and math.isinf(q_eff):
        val, w = norm_2_to_inf(T)
        return NormEstimate(p, val, val, 0, seed, q, w)
    if p == 1 and q_eff == 1:
        val = norm_1(T)
        return NormEstimate(p, val, val, 0, seed, q)
    lower, witness, iters, stalled = opnorm_lower(T, p, q_eff, restarts=restarts, seed=seed,
                                                  iterations=iterations, tol=tol, starts=starts)
    if not upper:
        up = math.inf
    elif q_eff == p:
        up = interpolation_upper(T, p)
    else:
        up = math.inf
    return NormEstimate(p, lower, up, restarts, seed, q, witness, iters, stalled)


# ---------------------------------------------------------------------------
# radial reduction


def radial_eigenfunctions(k_min: int, k_max: int, x: np.ndarray) -> np.ndarray:
    """L^2(R^2)-normalized radial eigenfunctions L_k(|x|^2/2) e^{-|x|^2/4} / sqrt(2 pi), rows k."""
    from .spectral import laguerre_functions

    return laguerre_functions(k_max, 0.5 * np.asarray(x, float) ** 2, k_min=k_min) / math.sqrt(2.0 * math.pi)


def radial_spectral_operator(mus: np.ndarray, multiplier: np.ndarray, lam: float, rgrid: RadialGrid,
                             ) -> LowRankOperator:
    """sum_mu m(mu) Pi_mu(sqrt(lam) z, sqrt(lam) z') restricted to radial functions (scaled coordinates)."""
    mus = np.asarray(mus, dtype=int)
    ks = (mus - 1) // 2
    r = rgrid.nodes
    e = radial_eigenfunctions(int(ks.min()), int(ks.max()), math.sqrt(lam) * r)[ks - ks.min()].T
    w = rgrid.weights
    return LowRankOperator(e, np.asarray(multiplier, dtype=complex), e, w, w, rgrid, rgrid)


def _multiplier_mus(lam: float, width: float) -> np.ndarray:
    lo = max(1, int(math.floor(lam - width)))
    hi = int(math.ceil(lam + width))
    mus = np.arange(lo | 1, hi + 1, 2)
    return mus[mus >= 1]


def window_multiplier(window, lam: float, rel_tol: float = 1e-12, width: float | None = None):
    """Odd mu and eta-check(lambda - mu) / c, truncated where |eta-check| < rel_tol max."""
    from .oscillatory_kernels import window_fourier

    if width is None:
        # scan dyadic blocks of frequencies until a whole block is negligible
        peak, last, lo = 0.0, 0.0, 0.0
        while lo < WIDTH_PROBE_MAX:
            s = np.arange(lo, max(2.0 * lo, 64.0), 1.0)
            v = np.abs(window_fourier(window, s)) + np.abs(window_fourier(window, -s))
            peak = max(peak, float(v.max()))
            big = np.nonzero(v > rel_tol * peak)[0]
            if big.size == 0:
                break
            last, lo = float(s[big[-1]]), float(s[-1] + 1.0)
        width = last + 2.0
    mus = _multiplier_mus(lam, width)
    return mus, window_fourier(window, lam - mus) / C_PROPAGATOR


def default_radial_grid(lam: float, mu_max: float, r_max: float | None = None) -> RadialGrid:
    """Radial grid resolving the eigenfunctions up to mu_max at scale sqrt(lam), two wavelengths per panel."""
    turning = 2.0 * math.sqrt(mu_max / lam)
    r_max = r_max or turning + 6.0 / math.sqrt(lam) + 0.25
    wavelength = 2.0 * math.pi / math.sqrt(lam * mu_max)
    panels = int(math.ceil(r_max / (2.0 * wavelength))) + 8
    return RadialGrid(r_max, panels, 16)


def radial_bracket_operator(window, lam: float, rgrid: RadialGrid | None = None, rel_tol: float = 1e-12):
    """[eta]^lambda restricted to radial functions, as a low-rank Laguerre expansion."""
    mus, m = window_multiplier(window, lam, rel_tol)
    rgrid = rgrid or default_radial_grid(lam, float(mus.max()))
    return radial_spectral_operator(mus, m, lam, rgrid)


def radial_kernel_quadrature(window, lam: float, rho: float, s: float, budget: float = 0.25) -> complex:
    """Angular average of [eta]^lambda((rho, 0), s e^{i theta}) by direct time quadrature.

    (1/2pi) int d theta [eta]^lambda = int eta(t) / sin t e^{i lam (t + (rho^2+s^2) cot t / 4)}
    J_0(lam rho s / (2 |sin t|)) dt; an independent check of the Laguerre expansion.
    """
    total = 0j
    for a, b in window.support:
        amin = max(min(abs(math.sin(a)), abs(math.sin(b)), 1.0), 1e-3)
        rate = lam * (1.0 + (rho * rho + s * s + 2 * rho * s) / (4.0 * amin * amin))
        t, wt = composite_nodes(uniform_breaks(a, b, budget / rate), 16)
        st = np.sin(t)
        vals = window(t) / st * np.exp(1j * lam * (t + (rho * rho + s * s) * np.cos(t) / (4.0 * st)))
        total += np.sum(wt * vals * j0(lam * rho * s / (2.0 * np.abs(st))))
    return complex(total)


# ---------------------------------------------------------------------------
# scaling scans


SCAN_TARGETS = {
    "prop2.1": {"exponent": -1.0, "tolerance": 0.15, "axis": "lambda"},
    "eq2.6": {"exponent": -1.0, "tolerance": 0.15, "axis": "lambda"},
    "prop2.2": {"exponent": -9.0, "tolerance": 4.0, "axis": "1+2^l|n|"},
    "eq3.2": {"exponent": -1.0, "tolerance": 0.15, "axis": "lambda"},
    "prop3.1": {"exponent": -0.25, "tolerance": 0.05, "axis": "2^j"},
    "prop4.1": {"exponent": -0.75, "tolerance": 0.05, "axis": "2^j"},
}


def scaling_scan(target: str, lam_grid: Sequence[float], params: dict | None = None, p: float = 4.0, *,
                 restarts: int = 4, seed: int = 0, iterations: int = 100) -> ScanReport:
    """Lower-bound norms across a parameter grid and the fitted log-log slope.

    The verdict is one-sided: the claimed estimates are upper bounds, so a
    measured slope at or below exponent + tolerance is consistent with them.
    For the j-scans (prop3.1, prop4.1) ``lam_grid`` lists j values at the
    fixed ``params["lam"]``; for prop2.2 it lists n values.
    """
    if target not in SCAN_TARGETS:
        raise ValueError(f"unknown scan target {target!r}")
    params = dict(params or {})
    spec = SCAN_TARGETS[target]
    kw = dict(restarts=restarts, seed=seed, iterations=iterations)
    if target in ("prop2.1", "eq2.6", "eq3.2"):
        for lam in lam_grid:
            if lam > LAM_CAP_QUADRATURE:
                raise ValueError(f"lambda = {lam} exceeds the quadrature cap {LAM_CAP_QUADRATURE}")
    if target == "prop2.1":
        xs, vals, extra = _scan_prop21(lam_grid, params, p, kw)
    elif target == "eq2.6":
        xs, vals, extra = _scan_eq26(lam_grid, params, p, kw)
    elif target == "prop2.2":
        xs, vals, extra = _scan_prop22(lam_grid, params, p, kw)
    elif target == "eq3.2":
        xs, vals, extra = _scan_eq32(lam_grid, params, p, kw)
    else:
        xs, vals, extra = _scan_patch(target, lam_grid, params, p, kw)
    params.update({"p": p, "restarts": restarts, "iterations": iterations})
    extra["axis"] = spec["axis"]
    extra["advisory"] = target in ("prop3.1", "prop4.1", "prop2.2", "eq3.2")
    return _loglog_report(f"scan-{target}", params, xs, vals, spec["exponent"], spec["tolerance"], seed,
                          extra=extra)


def _default_eta(params):
    from .oscillatory_kernels import WindowedSymbol

    a, b = params.get("eta_support", (math.pi / 4, 3 * math.pi / 4))
    return WindowedSymbol.interval(a, b, 1.0)


def _scan_prop21(lam_grid, params, p, kw):
    w0 = _default_eta(params)
    vals, ranks, sizes = [], [], []
    for lam in lam_grid:
        op = radial_bracket_operator(w0.with_lambda(lam), lam)
        est = opnorm_bracket(op, p, upper=False, **kw)
        vals.append(est.lower)
        ranks.append(int(op.core.size))
        sizes.append(int(op.shape[0]))
    return list(lam_grid), vals, {"reduction": "radial", "rank": ranks, "radial_nodes": sizes,
                                  "window": w0.label}


def _scan_eq26(lam_grid, params, p, kw):
    ell = int(params.get("ell", 2))
    delta = float(params.get("delta", 0.5))
    vals = []
    for lam in lam_grid:
        mus = _multiplier_mus(lam, 2.0**ell + 1.0)
        m = 2.0 * math.pi * co.psi_ell_delta(ell, delta, lam - mus) / C_PROPAGATOR
        keep = m != 0
        mus, m = mus[keep], m[keep]
        op = radial_spectral_operator(mus, m, lam, default_radial_grid(lam, float(mus.max())))
        vals.append(opnorm_bracket(op, p, upper=False, **kw).lower)
    return list(lam_grid), vals, {"reduction": "radial", "ell": ell, "delta": delta}


def prop22_operator(lam: float, ell: int, n: int, grid: Grid2D, delta: float = 0.5) -> TwistedConvolution:
    from .oscillatory_kernels import eta_eta_psi_window, kernel_operator

    return kernel_operator(eta_eta_psi_window("eta0", ell, delta, n, lam), grid)


def _scan_prop22(n_grid, params, p, kw):
    lam = float(params.get("lam", 16.0))
    ell = int(params.get("ell", 3))
    delta = float(params.get("delta", 0.5))
    half = float(params.get("half_width", 0.5))
    npts = int(params.get("n_grid", 64))
    grid = Grid2D.square(half, npts)
    vals = []
    for n in n_grid:
        vals.append(opnorm_bracket(prop22_operator(lam, ell, int(n), grid, delta), p, upper=False, **kw).lower)
    xs = [1.0 + 2.0**ell * abs(int(n)) for n in n_grid]
    return xs, vals, {"n": [int(n) for n in n_grid], "lam": lam, "ell": ell, "grid": grid.describe()}


def eq32_operator(lam: float, j: int, grid: Grid2D, window=None) -> TwistedConvolution:
    from .oscillatory_kernels import kernel_operator

    w = (window or _default_eta({})).with_lambda(lam)
    return kernel_operator(w, grid, cutoff=lambda r: co.chi_j(j, r))


def _scan_eq32(lam_grid, params, p, kw):
    j = int(params.get("j", 2))
    half = float(params.get("half_width", 1.5))
    vals, grids = [], []
    for lam in lam_grid:
        npts = int(params.get("n_grid", max(48, int(math.ceil(2 * half * lam / 4.0)))))
        grid = Grid2D.square(half, npts)
        vals.append(opnorm_bracket(eq32_operator(lam, j, grid), p, upper=False, **kw).lower)
        grids.append(grid.describe())
    return list(lam_grid), vals, {"j": j, "grids": grids}


def _scan_patch(target, j_grid, params, p, kw):
    from .stationary_phase import patch_operator

    lam = float(params.get("lam", 2.0**12))
    npts = int(params.get("n_grid", 24))
    vals, lam_eff = [], []
    for j in j_grid:
        op, factor = patch_operator(int(j), lam, cap=(target == "prop4.1"), n=npts)
        vals.append(factor * opnorm_bracket(op, p, upper=False, **kw).lower)
        lam_eff.append(lam * 2.0 ** (-1.5 * int(j)))
    xs = [2.0 ** int(j) for j in j_grid]
    return xs, vals, {"j": [int(j) for j in j_grid], "lam": lam, "lam_scaled": lam_eff,
                      "reduction": "anisotropic rescaling onto unit patches"}


# ---------------------------------------------------------------------------
# Riesz means


def convergence_experiment(f: SampledField, delta: float, p: float, lam_grid: Sequence[float], *,
                           mu_max: int = LAM_CAP_EIGENSUM, oracle: Callable | None = None) -> ScanReport:
    """||S_lambda^delta f - f||_p across lambda by the eigensum route.

    ``oracle(lam)`` may return the exact error for comparison (stored in extra).
    """
    from .spectral import RieszSpec, delta_crit, riesz_mean_eigensum

    if not delta > delta_crit(p):
        raise ValueError(f"delta = {delta} must exceed the critical index {delta_crit(p)} for p = {p}")
    errs, oracle_vals = [], []
    for lam in lam_grid:
        spec = RieszSpec(float(lam), delta, p)
        s = riesz_mean_eigensum(spec, f, mu_max)
        errs.append((s - f).lp_norm(p))
        if oracle is not None:
            oracle_vals.append(float(oracle(float(lam))))
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    slope, icpt, res = fit_slope(np.log(np.asarray(lam_grid, float)), np.log(errs)) if min(errs) > 0 else (
        float("nan"), float("nan"), float("nan"))
    extra = {"strictly_decreasing": decreasing, "final_error": errs[-1], "grid": f.grid.describe()}
    if oracle is not None:
        extra["oracle"] = oracle_vals
    return ScanReport("riesz-convergence", {"delta": delta, "p": p, "mu_max": mu_max}, [float(v) for v in lam_grid],
                      [float(e) for e in errs], slope, icpt, res, 0.0, 0.0, decreasing, 0, extra)
