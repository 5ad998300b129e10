import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twisted_riesz import cutoffs as co

positive = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)


@given(positive)
def test_dyadic_sum_is_one(t):
    assert co.dyadic_sum(t) == pytest.approx(1.0, abs=1e-14)


@given(st.floats(min_value=-10.0, max_value=10.0))
def test_psi_support_and_range(t):
    v = co.psi(t)
    assert 0.0 <= v <= 1.0
    if not 0.25 < t < 1.0:
        assert v == 0.0


@given(st.floats(min_value=1e-4, max_value=0.5))
def test_psi_tail_plateau(t):
    assert co.psi_tail(t) == pytest.approx(1.0, abs=1e-15)
    assert co.psi_tail(2.0 + t) == 0.0


def test_phi_tilde_even():
    t = np.linspace(-1, 1, 201)
    assert np.array_equal(co.phi_tilde_j(3, t), co.phi_tilde_j(3, -t))


@given(st.floats(min_value=1e-6, max_value=128.0), st.sampled_from([0.0, 0.25, 0.5, 1.5]))
def test_riesz_reconstruction(t, delta):
    assert co.riesz_reconstruction(128.0, delta, t) == pytest.approx(t**delta, rel=1e-13, abs=1e-15)


def test_psi_ell_delta_rejects_bad_indices():
    with pytest.raises(ValueError):
        co.psi_ell_delta(-1, 0.5, 1.0)
    with pytest.raises(ValueError):
        co.psi_ell_delta(1, -0.5, 1.0)


@given(st.floats(min_value=0.0, max_value=math.pi))
def test_eta_triple_identity(t):
    e0, e1 = co.eta_pair(t)
    assert e0 + e1 + co.eta0(t - math.pi) == pytest.approx(1.0, abs=1e-15)


def test_eta0_plateau_and_support():
    assert co.eta0(0.0) == 1.0
    assert co.eta0(co.ETA0_FLAT) == 1.0
    assert co.eta0(co.ETA0_OUTER) == 0.0
    assert co.ETA0_OUTER < 2.0**-5


@given(st.floats(min_value=-20.0, max_value=20.0))
def test_theta_partition(x):
    k = range(int(math.floor(x)) - 2, int(math.floor(x)) + 3)
    assert co.theta_partition(x, k) == pytest.approx(1.0, abs=1e-15)


@given(st.floats(min_value=0.0, max_value=4.0), st.integers(min_value=1, max_value=12))
def test_chi_split_sum(r, jmax):
    pieces, circ, ext = co.chi_split_r(jmax, np.array([r]))
    assert pieces.sum() + circ[0] + ext[0] == pytest.approx(1.0, abs=1e-14)


@given(st.floats(min_value=1.0, max_value=2.0**20))
def test_j0_definition(lam):
    j = co.j0_of_lambda(lam)
    assert 2.0 ** (3 * j) <= lam * lam < 2.0 ** (3 * (j + 1))


@given(st.floats(min_value=-math.pi, max_value=math.pi), st.integers(min_value=2, max_value=10))
def test_angular_caps_sum(om, j):
    eps0 = co.EPS0_DEFAULT
    total = sum(co.angular_bump_angle(c, j, eps0, om) for c in co.angular_centers(j, eps0))
    assert total == pytest.approx(1.0, abs=1e-14)


def test_angular_spacing_and_centre_check():
    j, eps0 = 6, co.EPS0_DEFAULT
    c = co.angular_centers(j, eps0)
    assert np.all(np.diff(c) <= eps0 * 2.0 ** (-j / 2) + 1e-15)
    with pytest.raises(ValueError):
        co.angular_bump(np.array([math.cos(0.5 * c[1]), math.sin(0.5 * c[1])]), j, eps0, np.array([1.0, 0.0]))


@pytest.mark.parametrize("j", [3, 6, 9])
def test_chi_tilde_family_resums(j):
    r = 2.0 - np.linspace(2.0 ** -(j + 2), 2.0**-j, 4001)[1:-1]
    total = sum(co.chi_tilde_r(a, j, r, check=False) for a in co.chi_tilde_centers(j))
    assert np.max(np.abs(total - co.psi(np.ldexp(2.0 - r, j)))) < 1e-14


def test_chi_tilde_checks_centre():
    with pytest.raises(ValueError):
        co.chi_tilde_r(1.0, 4, 1.9)


def test_lattice_pieces_resum(rng):
    j = 4
    z = rng.uniform(-0.01, 0.01, (200, 2))
    s1, s2 = co.lattice_scales(j)
    k1 = range(int(np.floor(s1 * z[:, 0].min())) - 2, int(np.ceil(s1 * z[:, 0].max())) + 3)
    k2 = range(int(np.floor(s2 * z[:, 1].min())) - 2, int(np.ceil(s2 * z[:, 1].max())) + 3)
    total = sum(co.lattice_piece((a, b), j, z) for a in k1 for b in k2)
    assert np.max(np.abs(total - 1.0)) < 1e-14


@pytest.mark.parametrize("kind,params", [
    ("psi", {}), ("psi_ell_delta", {"ell": 3, "delta": 0.5}), ("phi", {"j": 2}), ("eta0", {}),
    ("interval_bump", {"a": 0.2, "b": 1.0}), ("angular", {"nu_angle": 0.0, "j": 4, "eps0": 0.0625}),
])
def test_cutoff_family_roundtrip_and_support(kind, params):
    fam = co.CutoffFamily(kind, params)
    back = co.CutoffFamily.from_json(fam.to_json())
    assert back == fam
    lo, hi = fam.spec().support
    t = np.concatenate([np.linspace(lo - 1.0, lo, 50), np.linspace(hi, hi + 1.0, 50)])
    assert np.all(np.asarray(fam(t)) == 0.0)
    json.loads(fam.to_json())


def test_unknown_cutoff_kind():
    with pytest.raises(ValueError):
        co.CutoffFamily("nope")
