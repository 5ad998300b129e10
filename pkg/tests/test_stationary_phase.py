import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from twisted_riesz import stationary_phase as sp
from twisted_riesz.oscillatory_kernels import bracket_kernel
from twisted_riesz.propagator import dphase_r2

# [DERIVED] mpmath values
PHI_1_5 = 1.3441404498060917438
E_0_3 = 0.086836470182377471325
X_MINUS_SIN = {1e-3: 1.6666665833333353175e-10, 0.4: 0.010581657691349508334, 0.7: 0.055782312762308946327}


@given(st.floats(0.05, 1.95))
def test_stationary_point_is_root_of_dphase(r):
    root = brentq(lambda t: dphase_r2(t, r * r), 1e-9, math.pi / 2)
    assert sp.stationary_point_r(r) == pytest.approx(root, abs=1e-12)


def test_phi_frozen_and_consistent():
    z, zp = np.array([1.5, 0.0]), np.zeros(2)
    assert sp.Phi(z, zp) == pytest.approx(PHI_1_5, abs=1e-15)
    assert sp.Phi_via_phase(z, zp) == pytest.approx(PHI_1_5, abs=1e-15)
    assert abs(sp.stationarity_residual(z, zp)) < 1e-14


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_phi_routes_agree(x, y, xp, yp):
    z, zp = np.array([x, y]), np.array([xp, yp])
    if np.hypot(x - xp, y - yp) < 1e-3:
        return
    assert sp.Phi(z, zp) == pytest.approx(sp.Phi_via_phase(z, zp), abs=1e-13)


def test_stationary_point_domain():
    with pytest.raises(sp.OutOfRangeError):
        sp.stationary_point_r(2.5)
    with pytest.raises(ValueError):
        sp.stationary_point_r(0.0)


def test_scaffold_and_x_minus_sin_frozen():
    assert sp.scaffold_E(0.0) == pytest.approx(1.0 / 12.0, abs=1e-16)
    assert sp.scaffold_E(0.3) == pytest.approx(E_0_3, abs=1e-15)
    for x, v in X_MINUS_SIN.items():
        assert sp.x_minus_sin(np.array([x]))[0] == pytest.approx(v, rel=1e-14)


@given(st.floats(0.0, 1.0))
def test_scaffold_identity(t):
    # truncated series; the scaled geometry only needs small t
    # S~^2 = t (1 + t E(t)) with 1 - cos S~ = t / 2
    s = 2.0 * math.asin(0.5 * math.sqrt(t))
    assert s * s == pytest.approx(t * (1.0 + t * sp.scaffold_E(t)), rel=1e-12, abs=1e-15)


def test_cs_matrix_closed_matches_fd():
    z1, z2, s = np.array([0.3, 0.5, 0.7]), np.array([0.1, -0.2, 0.05]), np.array([0.2, -0.1, 0.0])
    fd = sp.fd_cs_matrix(lambda a, b, c: sp.model_phase(a, b, c, 0.1), z1, z2, s)
    assert np.max(np.abs(fd - sp.cs_matrix_closed(z1, z2, s))) < 1e-9


def test_cs_determinant_one_eighth():
    z = np.array([[0.5, 0.01], [0.2, -0.03]])
    s = np.array([0.01, -0.02])
    assert np.all(sp.cs_determinant(z, s, 0.3) == 0.125)
    assert np.allclose(sp.cs_determinant(z, s, 0.3, method="fd"), 0.125, atol=1e-9)
    with pytest.raises(ValueError):
        sp.cs_determinant(np.array([-0.1, 0.0]), 0.0, 0.0)
    with pytest.raises(ValueError):
        sp.cs_determinant(np.array([0.5, 0.9]), 0.0, 0.0)
    with pytest.raises(ValueError):
        sp.cs_determinant(z, 0.0, 0.0, method="bogus")


def test_cs_condition_full_phase():
    assert sp.cs_condition_full(6, count=256).passed


def test_b1_factorization():
    z, zp = sp.sample_box(200)
    lhs, rhs = sp.b1_factorization(8, z, zp)
    assert np.max(np.abs(lhs / rhs - 1.0)) < 1e-12


def test_residual_scan_stable():
    rep = sp.residual_scan(count=2000)
    assert rep.passed
    assert rep.extra["stability_factor"] < 2.0


def test_in_box_and_outside_error():
    z, zp = sp.sample_box(64)
    assert np.all(sp.in_box(z, zp))
    with pytest.raises(sp.OutsideBoxError):
        sp.scaled_geometry(6, np.array([1.0, 0.0]), np.zeros(2))


def test_leading_term_dominates():
    case = sp.DecayCase()
    z, zp = case.points()
    rel = []
    for lam in (256.0, 1024.0, 4096.0):
        w = case.window(lam)
        k = case.chi(z, zp) * bracket_kernel(w, z, zp)
        rel.append(abs(k - sp.leading_term(lam, case.j, w, case.chi, z, zp)) / abs(k))
    assert rel[0] > rel[1] > rel[2]
    assert rel[-1] < 0.05


def test_e_decay_short_sweep():
    rep = sp.e_decay_scan(2.0 ** np.arange(8, 12))
    assert abs(rep.slope + 1.5) < 0.15


def test_regime_errors():
    case = sp.DecayCase()
    z, zp = case.points()
    with pytest.raises(sp.RegimeError):
        sp.leading_term(4.0, 3, case.window(4.0), None, z, zp)
    with pytest.raises(sp.RegimeError):
        sp.DecayCase(j=3, eps0=1.0).window(256.0)


def test_patch_operator_shape():
    op, factor = sp.patch_operator(6, 256.0, n=12)
    assert op.matrix.shape == (144, 144)
    assert factor == 2.0**-9
