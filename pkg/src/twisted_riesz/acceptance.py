"""The acceptance gate: one function per criterion, each returning a CriterionResult.

Criteria 1-9 gate the build; criterion 10 is advisory and never fails the gate.
Every criterion carries a wall-clock budget that is part of its verdict.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cutoffs as co

SEED_DEFAULT = 0


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    runtime: float = 0.0
    budget: float | None = None
    advisory: bool = False
    summary: str = ""
    within_budget: bool = True

    @property
    def gating(self) -> bool:
        return not self.advisory

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if self.advisory:
            tag += " (advisory)"
        budget = f" / {self.budget:g} s" if self.budget else ""
        over = "" if self.within_budget else "; over budget"
        return f"[{tag}] {self.number}. {self.name}: {self.summary}{over} ({self.runtime:.2f} s{budget})"

    def to_dict(self, runtime: bool = False) -> dict:
        """Report form; wall-clock time is left out unless asked for so reports stay reproducible."""
        from .reports import jsonable

        d = {"number": self.number, "name": self.name, "passed": self.passed, "advisory": self.advisory,
             "budget": self.budget, "within_budget": self.within_budget, "summary": self.summary,
             "metrics": self.metrics}
        if runtime:
            d["runtime"] = self.runtime
        return jsonable(d)


def _timed(number: int, name: str, budget: float | None, fn: Callable[[], tuple[bool, dict, str]],
           advisory: bool = False) -> CriterionResult:
    t0 = time.perf_counter()
    ok, metrics, summary = fn()
    dt = time.perf_counter() - t0
    within = budget is None or dt < budget
    return CriterionResult(number, name, bool(ok and within), metrics, dt, budget, advisory, summary, within)


# ---------------------------------------------------------------------------
# 1. determinant identity


def criterion_1(seed: int = SEED_DEFAULT, samples: int = 1000) -> CriterionResult:
    from .stationary_phase import cs_determinant_closed, cs_determinant_fd

    def run():
        rng = np.random.default_rng(seed)
        eps0 = co.EPS0_DEFAULT
        z1 = rng.uniform(0.25, 1.0, samples)
        z2, s, z1p = (rng.uniform(-eps0, eps0, samples) for _ in range(3))
        closed = np.asarray(cs_determinant_closed(z1, z2, s, z1p))
        fd = np.asarray(cs_determinant_fd(z1, z2, s, z1p))
        exact = bool(np.all(closed == 0.125))
        err = float(np.max(np.abs(fd - 0.125)))
        ok = exact and err <= 1e-9
        return ok, {"closed_exact": exact, "fd_max_err": err, "samples": samples}, (
            f"closed form exact={exact}, FD max |det - 1/8| = {err:.2e} (tol 1e-9)")

    return _timed(1, "Carleson-Sjolin determinant", 5.0, run)


# ---------------------------------------------------------------------------
# 2. partition identities


def partition_errors(seed: int = SEED_DEFAULT, samples: int = 10_000) -> dict[str, float]:
    rng = np.random.default_rng(seed)
    out = {}
    t = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), samples))
    out["psi_dyadic"] = float(np.max(np.abs(co.dyadic_sum(t) - 1.0)))
    lam, delta = 64.0, 0.5
    t = rng.uniform(1e-6, lam, samples)
    out["riesz_reconstruction"] = float(np.max(np.abs(co.riesz_reconstruction(lam, delta, t) - t**delta)))
    t = rng.uniform(0.0, math.pi, samples)
    e0, e1 = co.eta_pair(t)
    out["eta_triple"] = float(np.max(np.abs(e0 + e1 + co.eta0(t - math.pi) - 1.0)))
    r = rng.uniform(0.0, 4.0, samples)
    pieces, circ, ext = co.chi_split_r(co.j0_of_lambda(2.0**12), r)
    out["chi_pieces"] = float(np.max(np.abs(pieces.sum(axis=0) + circ + ext - 1.0)))
    j, eps0 = 6, co.EPS0_DEFAULT
    om = rng.uniform(-math.pi, math.pi, samples)
    caps = sum(co.angular_bump_angle(c, j, eps0, om) for c in co.angular_centers(j, eps0))
    out["angular_caps"] = float(np.max(np.abs(caps - 1.0)))
    return out


def criterion_2(seed: int = SEED_DEFAULT, samples: int = 10_000) -> CriterionResult:
    def run():
        errs = partition_errors(seed, samples)
        worst = max(errs.values())
        return worst <= 1e-12, {**errs, "samples": samples}, f"worst identity error {worst:.2e} (tol 1e-12)"

    return _timed(2, "partition identities", 30.0, run)


# ---------------------------------------------------------------------------
# 3. phase symmetry


def criterion_3(seed: int = SEED_DEFAULT, samples: int = 1000) -> CriterionResult:
    from .propagator import symmetry_check_arrays

    def run():
        rng = np.random.default_rng(seed)
        t = rng.uniform(0.05, math.pi - 0.05, samples)
        z = rng.uniform(-3.0, 3.0, (samples, 2))
        zp = rng.uniform(-3.0, 3.0, (samples, 2))
        err = float(np.max(np.abs(symmetry_check_arrays(t, z, zp))))
        return err <= 1e-12, {"max_abs": err, "samples": samples}, f"max |residual| {err:.2e} (tol 1e-12)"

    return _timed(3, "phase symmetry", None, run)


# ---------------------------------------------------------------------------
# 4. dual-route projections


def criterion_4(seed: int = SEED_DEFAULT, pairs: int = 200) -> CriterionResult:
    from .discretization import Grid2D, SampledField
    from .spectral import projection_closed, projection_fourier, projection_operator

    def run():
        rng = np.random.default_rng(seed)
        z = rng.uniform(-3.0, 3.0, (pairs, 2))
        zp = rng.uniform(-3.0, 3.0, (pairs, 2))
        diffs = {}
        for mu in (1, 3, 5, 7):
            diffs[mu] = float(np.max(np.abs(projection_fourier(mu, z, zp) - projection_closed(mu, z, zp))))
        grid = Grid2D.square(8.0, 64)
        f = SampledField.from_function(grid, lambda x, y: np.exp(-(x * x + y * y) / 4.0))
        g = projection_operator(1, grid).apply(f)
        rel = (g - f).lp_norm(2.0) / f.lp_norm(2.0)
        worst = max(diffs.values())
        ok = worst <= 1e-6 and rel <= 1e-4
        return ok, {"route_diff": {str(k): v for k, v in diffs.items()}, "ground_state_rel_l2": rel}, (
            f"max route difference {worst:.2e} (tol 1e-6), ground state rel L2 {rel:.2e} (tol 1e-4)")

    return _timed(4, "dual-route projections", 120.0, run)


# ---------------------------------------------------------------------------
# 5. stationary-phase error decay


def criterion_5(seed: int = SEED_DEFAULT) -> CriterionResult:
    from .stationary_phase import e_decay_scan

    def run():
        rep = e_decay_scan()
        return rep.passed, rep.to_dict(), f"slope {rep.slope:.3f} (target -1.5 +- 0.15)"

    return _timed(5, "stationary-phase error decay", 120.0, run)


# ---------------------------------------------------------------------------
# 6. L2 bound


def l2_bound_case(lam: float, rho: float) -> dict:
    """||[eta_rho]^lambda||_{2->2} on the radial reduction, raw and with the propagator constant."""
    from .operator_lab import default_radial_grid, norm_2, radial_spectral_operator, window_multiplier
    from .oscillatory_kernels import WindowedSymbol, window_l1
    from .propagator import C_PROPAGATOR

    w = WindowedSymbol.eta_rho(rho, lam)
    # |eta-check| peaks within a few 1/rho of the origin; far multipliers do not affect the norm
    mus, m = window_multiplier(w, lam, width=8.0 / rho)
    op = radial_spectral_operator(mus, m, lam, default_radial_grid(lam, float(mus.max())))
    raw = norm_2(op)
    bound = window_l1(w) / lam
    normalized = abs(C_PROPAGATOR) * raw
    return {"lam": lam, "rho": rho, "norm_raw": raw, "norm_normalized": normalized, "bound": bound,
            "ratio_raw": raw / bound, "ratio_normalized": normalized / bound}


def criterion_6(seed: int = SEED_DEFAULT) -> CriterionResult:
    def run():
        cases = [l2_bound_case(lam, rho) for lam in (2.0**6, 2.0**8, 2.0**10) for rho in (1 / 8, 1 / 32)]
        worst = max(c["ratio_normalized"] for c in cases)
        raw = max(c["ratio_raw"] for c in cases)
        return worst <= 1.0 + 1e-3, {"cases": cases}, (
            f"max |c| norm / (lambda^-1 ||eta||_1) = {worst:.6f} (tol 1.001); without |c| = 1/(4 pi): {raw:.4f}")

    return _timed(6, "L2 bound", None, run)


# ---------------------------------------------------------------------------
# 7. operator norm trend of the local window


def criterion_7(seed: int = SEED_DEFAULT) -> CriterionResult:
    from .operator_lab import scaling_scan

    def run():
        rep = scaling_scan("prop2.1", [2.0**k for k in range(6, 13)], p=4.0, restarts=4, seed=seed,
                           iterations=100)
        return rep.passed, rep.to_dict(), f"4->4 lower-bound slope {rep.slope:.3f} (need <= -0.85)"

    return _timed(7, "local-window norm trend", 600.0, run)


# ---------------------------------------------------------------------------
# 8. Riesz convergence


def criterion_8(seed: int = SEED_DEFAULT) -> CriterionResult:
    from .discretization import Grid2D, SampledField
    from .operator_lab import convergence_experiment
    from .spectral import RieszSpec, riesz_error_gaussian

    def run():
        grid = Grid2D.square(8.0, 128)
        f = SampledField.from_function(grid, lambda x, y: np.exp(-(x * x + y * y)))
        lams = [9, 17, 33, 65, 129]
        rep = convergence_experiment(f, 0.5, 4.0, lams,
                                     oracle=lambda lam: riesz_error_gaussian(1.0, RieszSpec(lam, 0.5, 4.0)))
        vals = ", ".join(f"{v:.4g}" for v in rep.values)
        return rep.passed, rep.to_dict(), f"errors {vals}; strictly decreasing={rep.passed}"

    return _timed(8, "Riesz convergence", 300.0, run)


# ---------------------------------------------------------------------------
# 9. scaled geometry


def criterion_9(seed: int = SEED_DEFAULT) -> CriterionResult:
    from .stationary_phase import residual_scan

    def run():
        rep = residual_scan((6, 8, 10), seed=seed)
        ex = rep.extra
        return rep.passed, rep.to_dict(), (
            f"C(E2) spread x{ex['stability_factor']:.4f} (tol 2), max |ratio - 2/3| 2^j = "
            f"{max(ex['ratio_dev_scaled']):.4f} (tol 5)")

    return _timed(9, "scaled-geometry residuals", None, run)


# ---------------------------------------------------------------------------
# 10. advisory trends


def criterion_10(seed: int = SEED_DEFAULT) -> CriterionResult:
    from .discretization import Grid2D
    from .operator_lab import scaling_scan
    from .spectral import projection_norm_trend

    def run():
        p31 = scaling_scan("prop3.1", [4, 6, 8], {"lam": 2.0**12}, restarts=2, seed=seed, iterations=60)
        p41 = scaling_scan("prop4.1", [4, 6, 8], {"lam": 2.0**12}, restarts=2, seed=seed, iterations=60)
        proj = projection_norm_trend(list(range(1, 22, 2)), math.inf, Grid2D.square(8.0, 48), seed=seed)
        reports = {"prop3.1": p31.to_dict(), "prop4.1": p41.to_dict(), "projection": proj.to_dict()}
        ok = p31.passed and p41.passed and proj.passed
        return ok, reports, (f"j-scan (prop3.1) slope {p31.slope:.2f} (target -0.25), j-scan (prop4.1) slope {p41.slope:.2f} "
                             f"(target -0.75), projection 2->inf slope {proj.slope:.2f} (printed {proj.target:g})")

    return _timed(10, "advisory trends", None, run, advisory=True)


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}


def run_all(seed: int = SEED_DEFAULT, only=None, echo: Callable[[str], None] | None = None):
    results = []
    for k in sorted(CRITERIA):
        if only is not None and k not in only:
            continue
        res = CRITERIA[k](seed)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results


def gate(results) -> bool:
    return all(r.passed for r in results if r.gating)
