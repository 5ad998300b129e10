"""Command-line front end.

Every subcommand resolves its configuration as built-in defaults, then the
subcommand's own defaults, then a ``--config`` file of ``key=value`` lines,
then explicit flags. The resolved configuration, the version string and the
propagator normalization are written into every report. The report goes to
``--out`` (or stdout) and a one-line verdict goes to stderr.

Exit codes: 0 pass, 2 verdict fail, 1 usage or runtime error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parameter table


def _parse_real(text) -> float:
    s = str(text).strip().lower()
    if s in ("inf", "infinity", "+inf"):
        return math.inf
    if "^" in s:
        base, exp = s.split("^", 1)
        return float(base) ** float(exp)
    return float(s)


def _parse_int(text) -> int:
    v = _parse_real(text)
    if not math.isfinite(v) or v != int(v):
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _parse_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    items = [t for t in str(text).replace(";", ",").split(",") if t.strip()]
    if not items:
        raise ValueError("empty list")
    return [_parse_real(t) for t in items]


def _parse_int_list(text) -> list[int]:
    return [_parse_int(v) for v in (_parse_list(text) if not isinstance(text, list) else text)]


@dataclass(frozen=True)
class Param:
    parse: Callable
    check: Callable[[object], bool]
    rule: str
    default: object
    help: str


def _finite_pos(v):
    return math.isfinite(v) and v > 0


PARAMS: dict[str, Param] = {
    "lambda": Param(_parse_real, lambda v: _finite_pos(v) and v <= 2.0**14, "0 < lambda <= 2^14", 64.0,
                    "spectral parameter lambda"),
    "delta": Param(_parse_real, lambda v: math.isfinite(v) and 0 <= v <= 10, "0 <= delta <= 10", 0.5,
                   "Riesz index delta"),
    "ell": Param(_parse_int, lambda v: 0 <= v <= 12, "0 <= ell <= 12", 2, "dyadic level ell"),
    "j": Param(_parse_int, lambda v: 1 <= v <= 16, "1 <= j <= 16", 3, "dyadic scale j"),
    "n": Param(_parse_int, lambda v: abs(v) <= 64, "|n| <= 64", 0, "translate index n"),
    "l": Param(_parse_int, lambda v: 0 <= v <= 12, "0 <= l <= 12", 2, "angular level l (envelope b_l)"),
    "p": Param(_parse_real, lambda v: v >= 1, "1 <= p <= inf", 4.0, "Lebesgue exponent (inf allowed)"),
    "eps0": Param(_parse_real, lambda v: 0 < v <= 1, "0 < eps0 <= 1", 2.0**-4, "box or window scale eps0"),
    "grid_extent": Param(_parse_real, lambda v: _finite_pos(v) and v <= 64, "0 < extent <= 64", 8.0,
                         "grid half-width"),
    "grid_n": Param(_parse_int, lambda v: 8 <= v <= 512, "8 <= grid_n <= 512", 128, "grid nodes per side"),
    "mu_max": Param(_parse_int, lambda v: 1 <= v <= 1025 and v % 2 == 1, "odd, 1 <= mu_max <= 1025", 129,
                    "largest eigenvalue kept in eigensums"),
    "mu": Param(_parse_int, lambda v: 1 <= v <= 1025 and v % 2 == 1, "odd, 1 <= mu <= 1025", 1,
                "eigenvalue of the projection"),
    "seed": Param(_parse_int, lambda v: 0 <= v < 2**32, "0 <= seed < 2^32", 0, "random seed"),
    "samples": Param(_parse_int, lambda v: 1 <= v <= 10**6, "1 <= samples <= 10^6", 1000, "sample count"),
    "tol": Param(_parse_real, _finite_pos, "tol > 0", 1e-9, "pass/fail tolerance"),
    "target": Param(str, lambda v: v in ("prop2.1", "eq2.6", "prop2.2", "eq3.2", "prop3.1", "prop4.1"),
                    "one of prop2.1, eq2.6, prop2.2, eq3.2, prop3.1, prop4.1", "prop2.1", "scan target"),
    "family": Param(str, lambda v: v in ("b_l", "K_j", "exterior"), "one of b_l, K_j, exterior", "exterior",
                    "envelope family"),
    "sweep": Param(_parse_list, lambda v: len(v) >= 2 and all(math.isfinite(x) for x in v),
                   "at least two finite values", None, "comma list of scan values (lambda, j or n)"),
    "only": Param(_parse_int_list, lambda v: all(1 <= k <= 10 for k in v), "criteria in 1..10", None,
                  "comma list of criteria to run"),
    "format": Param(str, lambda v: v in ("json", "csv"), "json or csv", "json", "report format"),
    "out": Param(str, lambda v: True, "a path or -", None, "report path (default stdout)"),
}

FLAG_KEYS = ("lambda", "delta", "ell", "j", "n", "l", "p", "eps0", "grid_extent", "grid_n", "mu_max", "mu",
             "seed", "samples", "tol", "target", "family", "sweep", "only", "format", "out")


def _lam_sweep(lo: int, hi: int) -> list[float]:
    return [2.0**k for k in range(lo, hi + 1)]


# relevant keys and their per-command defaults
COMMANDS: dict[str, dict] = {
    "verify-cutoffs": {"keys": ("samples", "seed", "tol"), "defaults": {"samples": 10_000, "tol": 1e-12},
                       "help": "partition-of-unity identities of the cutoff families"},
    "kernel-eval": {"keys": ("lambda", "samples", "seed", "grid_extent", "tol"),
                    "defaults": {"samples": 16, "grid_extent": 1.5, "tol": 1e-8},
                    "help": "[eta]^lambda at random pairs with a budget-halving error estimate"},
    "projection": {"keys": ("mu", "samples", "seed", "grid_extent", "tol"),
                   "defaults": {"samples": 200, "grid_extent": 3.0, "tol": 1e-6},
                   "help": "spectral projection kernel by the Fourier and closed-form routes"},
    "riesz-apply": {"keys": ("lambda", "delta", "p", "grid_extent", "grid_n", "mu_max", "tol"),
                    "defaults": {"lambda": 33.0, "tol": 1e-6},
                    "help": "Riesz mean of a Gaussian on a grid against the exact radial oracle"},
    "stationary-compare": {"keys": ("j", "eps0", "sweep"), "defaults": {"eps0": 0.5, "sweep": _lam_sweep(8, 14)},
                           "help": "stationary-phase remainder decay in lambda"},
    "det-check": {"keys": ("samples", "seed", "eps0", "tol"), "defaults": {"tol": 1e-9},
                  "help": "determinant of the mixed Hessian matrix (closed form and finite differences)"},
    "envelope-scan": {"keys": ("family", "ell", "j", "l", "n", "sweep"),
                      "defaults": {"sweep": _lam_sweep(6, 9)},
                      "help": "empirical envelope constants across lambda"},
    "opnorm-scan": {"keys": ("target", "sweep", "p", "ell", "delta", "j", "lambda", "seed"),
                    "defaults": {},
                    "help": "lower-bound operator norms across a scan and the fitted log-log slope"},
    "convergence": {"keys": ("delta", "p", "sweep", "grid_extent", "grid_n", "mu_max"),
                    "defaults": {"sweep": [9.0, 17.0, 33.0, 65.0, 129.0]},
                    "help": "||S_lambda^delta f - f||_p for a Gaussian across lambda"},
    "all-acceptance": {"keys": ("seed", "only"), "defaults": {},
                       "help": "the full acceptance gate"},
}

SCAN_DEFAULT_SWEEPS = {
    "prop2.1": _lam_sweep(6, 9),
    "eq2.6": _lam_sweep(6, 9),
    "eq3.2": [8.0, 16.0, 32.0],
    "prop2.2": [0.0, 1.0, 2.0, 4.0],
    "prop3.1": [4.0, 6.0, 8.0],
    "prop4.1": [4.0, 6.0, 8.0],
}


# ---------------------------------------------------------------------------
# configuration


def _norm_key(k: str) -> str:
    return k.strip().lstrip("-").replace("-", "_")


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e.strerror}") from None
    out = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected key=value")
        k, v = line.split("=", 1)
        k = _norm_key(k)
        if k not in PARAMS:
            raise UsageError(f"{path}:{no}: unknown key {k!r}")
        out[k] = v.strip()
    return out


@dataclass
class ExperimentConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, k):
        return self.values[k]

    def report_config(self) -> dict:
        keys = COMMANDS[self.command]["keys"] + ("format",)
        return {"command": self.command, **{k: self.values[k] for k in keys}}


def resolve(command: str, given: dict, config_file: str | None = None) -> ExperimentConfig:
    raw = {k: p.default for k, p in PARAMS.items()}
    raw.update(COMMANDS[command]["defaults"])
    if config_file:
        raw.update(read_config_file(config_file))
    raw.update(given)
    vals = {}
    for k, p in PARAMS.items():
        v = raw[k]
        if v is None:
            vals[k] = None
            continue
        try:
            v = p.parse(v) if isinstance(v, str) or p.parse in (_parse_list, _parse_int_list) else v
        except (ValueError, TypeError) as e:
            raise UsageError(f"invalid value for {k}: {raw[k]!r} ({e})") from None
        if not p.check(v):
            raise UsageError(f"{k} = {v!r} out of range: need {p.rule}")
        vals[k] = v
    if command == "opnorm-scan" and vals["sweep"] is None:
        vals["sweep"] = SCAN_DEFAULT_SWEEPS[vals["target"]]
    return ExperimentConfig(command, vals)


def _check_output(out: str | None):
    if out is None or out == "-":
        return
    path = Path(out)
    parent = path.parent if str(path.parent) else Path(".")
    if path.is_dir() or not parent.is_dir() or not os.access(parent, os.W_OK) or (
            path.exists() and not os.access(path, os.W_OK)):
        raise UsageError(f"output path {out} is not writable")


# ---------------------------------------------------------------------------
# commands: each returns (passed, payload, rows, summary)


def _pairs(cfg, extent):
    rng = np.random.default_rng(cfg["seed"])
    m = cfg["samples"]
    return rng.uniform(-extent, extent, (m, 2)), rng.uniform(-extent, extent, (m, 2))


def cmd_verify_cutoffs(cfg):
    from .acceptance import partition_errors

    errs = partition_errors(cfg["seed"], cfg["samples"])
    worst = max(errs.values())
    rows = [{"identity": k, "max_abs_error": v} for k, v in errs.items()]
    return worst <= cfg["tol"], {"errors": errs, "worst": worst}, rows, f"worst identity error {worst:.3e}"


def cmd_kernel_eval(cfg):
    from .oscillatory_kernels import WindowedSymbol, bracket_kernel_certified
    from .propagator import C_PROPAGATOR

    lam = cfg["lambda"]
    w = WindowedSymbol.interval(math.pi / 4, 3 * math.pi / 4, lam)
    z, zp = _pairs(cfg, cfg["grid_extent"])
    val, err = bracket_kernel_certified(w, z, zp)
    val, err = np.atleast_1d(val), np.atleast_1d(err)
    scale = max(1.0, float(np.max(np.abs(val))))
    worst = float(np.max(err)) / scale
    rows = [{"z1": a[0], "z2": a[1], "zp1": b[0], "zp2": b[1], "re": complex(v).real, "im": complex(v).imag,
             "abs": abs(v), "err_est": e} for a, b, v, e in zip(z, zp, val, err)]
    payload = {"window": w.label, "support": [math.pi / 4, 3 * math.pi / 4], "c": C_PROPAGATOR,
               "max_rel_err_est": worst, "note": "values omit the propagator constant c"}
    return worst <= cfg["tol"], payload, rows, f"max relative error estimate {worst:.3e}"


def cmd_projection(cfg):
    from .spectral import projection_closed, projection_fourier

    mu = cfg["mu"]
    z, zp = _pairs(cfg, cfg["grid_extent"])
    a = np.asarray(projection_fourier(mu, z, zp))
    b = np.asarray(projection_closed(mu, z, zp))
    d = np.abs(a - b)
    worst = float(d.max())
    rows = [{"z1": p[0], "z2": p[1], "zp1": q[0], "zp2": q[1], "re": v.real, "im": v.imag, "route_diff": e}
            for p, q, v, e in zip(z, zp, b, d)]
    return worst <= cfg["tol"], {"mu": mu, "max_route_diff": worst}, rows, f"max route difference {worst:.3e}"


def cmd_riesz_apply(cfg):
    from .discretization import Grid2D, SampledField
    from .spectral import RieszSpec, riesz_error_gaussian, riesz_mean_eigensum

    spec = RieszSpec(cfg["lambda"], cfg["delta"], cfg["p"])
    if cfg["lambda"] > cfg["mu_max"]:
        raise UsageError(f"lambda = {cfg['lambda']:g} exceeds mu_max = {cfg['mu_max']}")
    grid = Grid2D.square(cfg["grid_extent"], cfg["grid_n"])
    f = SampledField.from_function(grid, lambda x, y: np.exp(-(x * x + y * y)))
    s = riesz_mean_eigensum(spec, f, cfg["mu_max"])
    err = (s - f).lp_norm(spec.p)
    exact = riesz_error_gaussian(1.0, spec)
    dev = abs(err - exact) / max(exact, 1e-300)
    payload = {"norm_f": f.lp_norm(spec.p), "norm_S_f": s.lp_norm(spec.p), "error_grid": err, "error_exact": exact,
               "rel_deviation": dev, "grid": grid.describe(), "delta_crit": spec.delta_crit}
    return dev <= cfg["tol"], payload, None, f"||S f - f||_p = {err:.6e}, oracle rel deviation {dev:.2e}"


def cmd_stationary_compare(cfg):
    from .stationary_phase import DecayCase, RegimeError, e_decay_scan

    try:
        case = DecayCase(j=cfg["j"], eps0=cfg["eps0"])
        case.window(cfg["sweep"][0])
    except RegimeError as e:
        raise UsageError(str(e)) from None
    rep = e_decay_scan(cfg["sweep"], case)
    rows = [{"lambda": x, "abs_E": v, "abs_leading": l}
            for x, v, l in zip(rep.x, rep.values, rep.extra["leading_abs"])]
    return rep.passed, rep.to_dict(), rows, f"slope {rep.slope:.4f} (target -1.5 +- 0.15)"


def cmd_det_check(cfg):
    from .stationary_phase import cs_determinant_closed, cs_determinant_fd

    rng = np.random.default_rng(cfg["seed"])
    m, eps0 = cfg["samples"], cfg["eps0"]
    z1 = rng.uniform(0.25, 1.0, m)
    z2, s, z1p = (rng.uniform(-eps0, eps0, m) for _ in range(3))
    closed = np.asarray(cs_determinant_closed(z1, z2, s, z1p, eps0))
    fd = np.asarray(cs_determinant_fd(z1, z2, s, z1p, eps0))
    exact = bool(np.all(closed == 0.125))
    err = float(np.max(np.abs(fd - 0.125)))
    payload = {"closed_form_exact": exact, "closed_max_abs_dev": float(np.max(np.abs(closed - 0.125))),
               "fd_max_abs_dev": err, "samples": m}
    return exact and err <= cfg["tol"], payload, None, f"max |det - 0.125| = {err:.3e} (finite differences)"


def cmd_envelope_scan(cfg):
    from .oscillatory_kernels import C0_DEFAULT, KernelEnvelope, envelope_check

    env = KernelEnvelope(cfg["family"], ell=cfg["ell"], j=cfg["j"], l=cfg["l"], n=cfg["n"])
    rep = envelope_check(env, cfg["sweep"])
    rows = [{"lambda": x, "constant": v} for x, v in zip(rep.x, rep.values)]
    payload = rep.to_dict()
    if env.family == "b_l":
        # the b_l bound is only claimed away from the diagonal 2l = j
        payload["in_regime"] = abs(2 * env.l - env.j) > C0_DEFAULT
    return rep.passed, payload, rows, f"constants {', '.join(f'{v:.3g}' for v in rep.values)}"


def cmd_opnorm_scan(cfg):
    from .operator_lab import scaling_scan

    target = cfg["target"]
    sweep = cfg["sweep"]
    if target in ("prop3.1", "prop4.1", "prop2.2"):
        sweep = [int(v) for v in sweep]
    params = {"ell": cfg["ell"], "delta": cfg["delta"], "j": cfg["j"]}
    if target in ("prop3.1", "prop4.1", "prop2.2"):
        params["lam"] = cfg["lambda"]
    rep = scaling_scan(target, sweep, params, p=cfg["p"], seed=cfg["seed"])
    rows = [{"x": x, "norm_lower": v} for x, v in zip(rep.x, rep.values)]
    return rep.passed, rep.to_dict(), rows, f"slope {rep.slope:.4f} (target {rep.target:g} + {rep.tolerance:g})"


def cmd_convergence(cfg):
    from .discretization import Grid2D, SampledField
    from .operator_lab import convergence_experiment
    from .spectral import RieszSpec, delta_crit, riesz_error_gaussian

    delta, p = cfg["delta"], cfg["p"]
    if not delta > delta_crit(p):
        raise UsageError(f"delta = {delta:g} must exceed the critical index delta_crit({p:g}) = "
                         f"{delta_crit(p):g} strictly")
    lams = cfg["sweep"]
    if max(lams) > cfg["mu_max"]:
        raise UsageError(f"lambda values must not exceed mu_max = {cfg['mu_max']}")
    grid = Grid2D.square(cfg["grid_extent"], cfg["grid_n"])
    f = SampledField.from_function(grid, lambda x, y: np.exp(-(x * x + y * y)))
    rep = convergence_experiment(f, delta, p, lams, mu_max=cfg["mu_max"],
                                 oracle=lambda lam: riesz_error_gaussian(1.0, RieszSpec(lam, delta, p)))
    rows = [{"lambda": x, "error": v, "error_exact": o} for x, v, o in zip(rep.x, rep.values, rep.extra["oracle"])]
    return rep.passed, rep.to_dict(), rows, f"errors {', '.join(f'{v:.4g}' for v in rep.values)}"


def cmd_all_acceptance(cfg):
    from .acceptance import gate, run_all

    only = set(cfg["only"]) if cfg["only"] else None
    results = run_all(cfg["seed"], only, echo=lambda s: print(s, file=sys.stderr, flush=True))
    ok = gate(results)
    rows = [{"criterion": r.number, "name": r.name, "passed": r.passed, "advisory": r.advisory,
             "summary": r.summary} for r in results]
    payload = {"gate_passed": ok, "criteria": [r.to_dict() for r in results]}
    return ok, payload, rows, f"gate {'passed' if ok else 'failed'} ({sum(r.passed for r in results)}/{len(results)})"


HANDLERS = {
    "verify-cutoffs": cmd_verify_cutoffs,
    "kernel-eval": cmd_kernel_eval,
    "projection": cmd_projection,
    "riesz-apply": cmd_riesz_apply,
    "stationary-compare": cmd_stationary_compare,
    "det-check": cmd_det_check,
    "envelope-scan": cmd_envelope_scan,
    "opnorm-scan": cmd_opnorm_scan,
    "convergence": cmd_convergence,
    "all-acceptance": cmd_all_acceptance,
}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    for k in FLAG_KEYS:
        p = PARAMS[k]
        common.add_argument("--" + k.replace("_", "-"), dest=k, default=argparse.SUPPRESS,
                            help=f"{p.help} ({p.rule})")
    common.add_argument("--config", default=argparse.SUPPRESS, help="key=value file; flags override it")
    parser = _Parser(prog="twisted-riesz", description="Numerical checks for twisted Bochner-Riesz means.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, spec in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=spec["help"], description=spec["help"])
    return parser


def run(argv=None) -> int:
    from .reports import envelope, write_report

    try:
        ns = vars(build_parser().parse_args(argv))
        command = ns.pop("command", None)
        if command is None:
            raise UsageError("a subcommand is required (see --help)")
        config_file = ns.pop("config", None)
        cfg = resolve(command, ns, config_file)
        _check_output(cfg["out"])
        passed, payload, rows, summary = HANDLERS[command](cfg)
        doc = envelope(command, cfg.report_config(), {"passed": bool(passed), **payload})
        text = write_report(doc, cfg["out"], cfg["format"], rows)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, RuntimeError, MemoryError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    if cfg["out"] is None or cfg["out"] == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    print(f"[{'PASS' if passed else 'FAIL'}] {command}: {summary}", file=sys.stderr)
    return EXIT_PASS if passed else EXIT_FAIL


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
