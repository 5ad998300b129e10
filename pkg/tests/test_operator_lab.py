import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twisted_riesz import operator_lab as ol
from twisted_riesz.discretization import DenseOperator, Grid2D, LowRankOperator, SampledField
from twisted_riesz.oscillatory_kernels import WindowedSymbol, window_fourier
from twisted_riesz.propagator import C_PROPAGATOR


def _dense(rng, m=12, n=9):
    k = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    return DenseOperator(k, rng.uniform(0.5, 1.5, n), rng.uniform(0.5, 1.5, m))


def test_exact_norms(rng):
    T = _dense(rng)
    k, ws, wt = T.matrix, T.src_weights, T.tgt_weights
    assert ol.norm_inf(T) == pytest.approx(np.max(np.abs(k) @ ws))
    assert ol.norm_1(T) == pytest.approx(np.max(wt @ np.abs(k)))
    a = np.sqrt(wt)[:, None] * k * np.sqrt(ws)[None, :]
    assert ol.norm_2(T) == pytest.approx(np.linalg.norm(a, 2))
    val, wit = ol.norm_2_to_inf(T)
    assert val == pytest.approx(np.max(np.sqrt(np.abs(k) ** 2 @ ws)))
    g = T.matvec(wit)
    assert np.max(np.abs(g)) == pytest.approx(val)


def test_low_rank_norm_fast_path(rng):
    left, right = rng.standard_normal((300, 5)), rng.standard_normal((200, 5))
    op = LowRankOperator(left, rng.standard_normal(5) + 1j, right, rng.uniform(0.1, 1, 200), rng.uniform(0.1, 1, 300))
    dense = DenseOperator(op.to_dense(), op.src_weights, op.tgt_weights)
    assert ol.norm_2(op) == pytest.approx(ol.norm_2(dense), rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
def test_bracket_orders_bounds(p, rng):
    T = _dense(rng, 20, 20)
    est = ol.opnorm_bracket(T, p, restarts=4, seed=1)
    assert 0 < est.lower <= est.upper * (1 + 1e-12)
    assert est.ratio >= 1.0
    assert json.dumps(est.to_dict())


def test_two_norm_ascent_reaches_exact(rng):
    T = _dense(rng, 15, 15)
    est = ol.opnorm_bracket(T, 2.0, restarts=4, iterations=500)
    assert est.lower == pytest.approx(est.upper, rel=1e-8)


def test_opnorm_seed_determinism(rng):
    T = _dense(rng, 15, 15)
    a = ol.opnorm_bracket(T, 4.0, restarts=3, seed=7).lower
    b = ol.opnorm_bracket(T, 4.0, restarts=3, seed=7).lower
    assert a == b


def test_opnorm_rejects_bad_exponent(rng):
    with pytest.raises(ValueError):
        ol.opnorm_bracket(_dense(rng), 0.5)


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=-5, max_value=5))
def test_fit_slope_exact_power_law(slope, icpt):
    x = np.log(2.0 ** np.arange(6, 12))
    s, i, r = ol.fit_slope(x, slope * x + icpt)
    assert s == pytest.approx(slope, abs=1e-9) and r < 1e-9


def test_scan_report_roundtrip():
    rep = ol._loglog_report("t", {"a": 1}, [1, 2, 4], [1.0, 0.5, 0.25], -1.0, 0.1, 3)
    assert rep.passed and rep.slope == pytest.approx(-1.0)
    back = ol.ScanReport.from_dict(json.loads(rep.to_json()))
    assert back == rep
    assert back.refit()[0] == pytest.approx(-1.0)
    # one-sided verdict: a steeper slope passes, a shallower one fails
    assert ol._loglog_report("t", {}, [1, 2, 4], [1.0, 0.25, 1 / 16], -1.0, 0.1, 0).passed
    assert not ol._loglog_report("t", {}, [1, 2, 4], [1.0, 1.0, 1.0], -1.0, 0.1, 0).passed


def test_window_multiplier_is_fourier_over_c():
    lam = 64.0
    w = WindowedSymbol.interval(math.pi / 4, 3 * math.pi / 4, lam)
    mus, m = ol.window_multiplier(w, lam)
    assert np.all(mus % 2 == 1)
    assert np.allclose(m * C_PROPAGATOR, window_fourier(w, lam - mus), atol=1e-15)


def test_radial_operator_matches_time_quadrature():
    lam = 32.0
    w = WindowedSymbol.interval(math.pi / 4, 3 * math.pi / 4, lam)
    op = ol.radial_bracket_operator(w, lam)
    r, K = op.src_grid.nodes, op.to_dense()
    for i, k in [(10, 40), (50, 60), (100, 20)]:
        ref = ol.radial_kernel_quadrature(w, lam, r[i], r[k])
        assert K[i, k] == pytest.approx(ref, rel=1e-9, abs=1e-14)


def test_l2_bound_case_ratio():
    from twisted_riesz.acceptance import l2_bound_case

    c = l2_bound_case(64.0, 1 / 8)
    assert c["ratio_normalized"] <= 1.0 + 1e-3
    # the raw ratio carries the factor 1 / |c| = 4 pi
    assert c["ratio_raw"] == pytest.approx(4 * math.pi * c["ratio_normalized"])


def test_scaling_scan_eq26_slope():
    rep = ol.scaling_scan("eq2.6", [32.0, 64.0, 128.0], restarts=2, iterations=60)
    assert rep.passed and rep.slope == pytest.approx(-1.0, abs=0.15)


def test_scaling_scan_validation():
    with pytest.raises(ValueError):
        ol.scaling_scan("nope", [1.0, 2.0])
    with pytest.raises(ValueError):
        ol.scaling_scan("prop2.1", [2.0**15, 2.0**16])


def test_patch_scan_runs():
    rep = ol.scaling_scan("prop3.1", [4, 6], {"lam": 2.0**10, "n_grid": 12}, restarts=1, iterations=20)
    assert rep.extra["advisory"] and len(rep.values) == 2 and all(v > 0 for v in rep.values)


def test_convergence_experiment_rejects_critical_delta():
    g = Grid2D.square(4.0, 16)
    f = SampledField.from_function(g, lambda x, y: np.exp(-(x * x + y * y)))
    with pytest.raises(ValueError):
        ol.convergence_experiment(f, 0.0, 4.0, [9, 17])


def test_convergence_experiment_decreasing():
    g = Grid2D.square(8.0, 64)
    f = SampledField.from_function(g, lambda x, y: np.exp(-(x * x + y * y)))
    rep = ol.convergence_experiment(f, 0.5, 4.0, [9, 17, 33])
    assert rep.passed and rep.values[0] > rep.values[-1]
