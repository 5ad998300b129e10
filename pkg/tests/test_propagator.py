import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twisted_riesz import propagator as pr
from twisted_riesz.spectral import projection_closed

coord = st.floats(min_value=-3.0, max_value=3.0)
time = st.floats(min_value=0.05, max_value=math.pi - 0.05)


def test_normalization_constant():
    assert pr.C_PROPAGATOR == 1.0 / (4.0j * math.pi)


@given(time, coord, coord, coord, coord)
def test_phase_reflection_symmetry(t, a, b, c, d):
    z, zp = np.array([a, b]), np.array([c, d])
    assert abs(pr.symmetry_check_arrays(t, z, zp)) <= 1e-12 * max(1.0, abs(pr.phase(t, z, zp)))


@given(time, st.floats(min_value=0.0, max_value=3.9))
def test_comparability_ratio_identity(t, r):
    assert pr.comparability_ratio_r(t, r) == pytest.approx(1.0 / (4.0 * math.sin(t) ** 2), rel=1e-6)


def test_derivatives_match_finite_differences():
    t, r2, cr = 1.1, 2.3, 0.4
    h = 1e-5
    d1 = (pr.phase_r2(t + h, r2, cr) - pr.phase_r2(t - h, r2, cr)) / (2 * h)
    d2 = (pr.dphase_r2(t + h, r2) - pr.dphase_r2(t - h, r2)) / (2 * h)
    assert d1 == pytest.approx(pr.dphase_r2(t, r2), rel=1e-9)
    assert d2 == pytest.approx(pr.d2phase_r2(t, r2), rel=1e-8)


def test_phase_point_ops():
    p = pr.PhasePoint(1.0, (0.3, 0.1), (-0.2, 0.4))
    assert p.r2 == pytest.approx(0.34)
    assert pr.phase_P(p) == pytest.approx(float(pr.phase(1.0, np.array(p.z), np.array(p.zp))))
    assert abs(pr.symmetry_check(p)) < 1e-14
    with pytest.raises(pr.SingularTimeError):
        pr.phase_P(pr.PhasePoint(0.0, (0.0, 0.0), (1.0, 0.0)))


def test_kernel_singular_times():
    with pytest.raises(pr.SingularTimeError):
        pr.mehler_kernel(math.pi, np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        pr.ComplexTime(1.0, -0.1)
    # off the real axis the kernel is defined at every t
    assert np.isfinite(pr.mehler_kernel(pr.ComplexTime(0.0, 0.5), np.zeros(2), np.ones(2)))


def test_small_time_limit_matches_free_propagator():
    # c / sin t exp(i r^2 cot t / 4) -> exp(i r^2 / (4 t)) / (4 pi i t)
    t, z, zp = 1e-4, np.array([0.01, 0.0]), np.zeros(2)
    free = np.exp(1j * 0.01**2 / (4 * t)) / (4j * math.pi * t)
    assert pr.mehler_kernel(t, z, zp) == pytest.approx(free, rel=1e-7)


def test_imaginary_time_tends_to_ground_state_projection(rng):
    # K(-i s) = sum_mu e^{-s mu} Pi_mu, so e^{s} K(-i s) -> Pi_1 as s grows
    s = 25.0
    z, zp = rng.uniform(-2, 2, (20, 2)), rng.uniform(-2, 2, (20, 2))
    k = pr.mehler_kernel(pr.ComplexTime(0.0, s), z, zp) * math.exp(s)
    assert np.max(np.abs(k - projection_closed(1, z, zp))) < 1e-12


def test_rotation_invariance(rng):
    t = 0.9
    z, zp = rng.uniform(-2, 2, (50, 2)), rng.uniform(-2, 2, (50, 2))
    R = pr.rotation(0.7)
    assert np.allclose(pr.phase(t, z @ R.T, zp @ R.T), pr.phase(t, z, zp), atol=1e-13)
