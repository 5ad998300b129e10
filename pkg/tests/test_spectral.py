import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import eval_laguerre

from twisted_riesz import spectral as sp
from twisted_riesz.discretization import Grid2D, SampledField

Z, ZP = np.array([0.7, 0.2]), np.array([-0.1, 0.3])


def test_closed_form_constant_is_one_over_two_pi():
    assert sp.closed_form_constant() == pytest.approx(1.0 / (2.0 * math.pi), abs=1e-12)


def test_projection_frozen_value():
    # [DERIVED] mpmath: (1/2pi) L_2(r^2/2) e^{-r^2/4} e^{iS} at Z, ZP
    ref = 0.054134246083378558436 - 0.0062530280658193536882j
    assert sp.projection_closed(5, Z, ZP) == pytest.approx(ref, abs=1e-14)
    assert sp.projection_fourier(5, Z, ZP) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("mu", [1, 3, 5, 7])
def test_dual_routes_agree(mu, rng):
    z, zp = rng.uniform(-3, 3, (100, 2)), rng.uniform(-3, 3, (100, 2))
    assert np.max(np.abs(sp.projection_fourier(mu, z, zp) - sp.projection_closed(mu, z, zp))) < 1e-6


def test_diagonal_value():
    z = np.array([[0.3, -1.2], [2.0, 0.5]])
    for mu in (1, 9, 33):
        assert np.allclose(sp.projection_closed(mu, z, z), 1.0 / (2.0 * math.pi), atol=1e-13)


@pytest.mark.parametrize("mu", [0, 2, -1])
def test_projection_rejects_even_mu(mu):
    with pytest.raises(ValueError):
        sp.projection_closed(mu, Z, ZP)


def test_eps_schedule_validation():
    with pytest.raises(ValueError):
        sp.projection_fourier_r2(1, 1.0, (0.1, 0.2))


@given(st.integers(min_value=0, max_value=60), st.floats(min_value=0.0, max_value=80.0))
def test_laguerre_functions_match_scipy(k, x):
    ref = eval_laguerre(k, x) * math.exp(-x / 2)
    assert sp.laguerre_function(k, x) == pytest.approx(ref, abs=1e-10)


def test_laguerre_functions_large_argument_no_overflow():
    v = sp.laguerre_functions(400, np.array([2000.0]))
    assert np.all(np.isfinite(v))


@pytest.mark.parametrize("a", [0.25, 1.0, 3.0])
def test_gaussian_coefficients(a):
    c = sp.gaussian_coefficients(a, 6)
    for k in range(7):
        ref = quad(lambda x: math.exp(-2 * a * x) * eval_laguerre(k, x) * math.exp(-x / 2), 0, np.inf)[0]
        assert c[k] == pytest.approx(ref, rel=1e-10, abs=1e-14)
    # [DERIVED] mpmath: c_3 at a = 1 is 0.0864
    assert sp.gaussian_coefficients(1.0, 3)[3] == pytest.approx(0.0864, rel=1e-14)


@pytest.mark.parametrize("p,expected", [(1.0, 0.5), (2.0, 0.0), (4.0, 0.0), (6.0, 1.0 / 6.0), (math.inf, 0.5)])
def test_delta_crit(p, expected):
    assert sp.delta_crit(p) == pytest.approx(expected)


def test_riesz_spec_validation():
    with pytest.raises(ValueError):
        sp.RieszSpec(0.0, 0.5)
    with pytest.raises(ValueError):
        sp.RieszSpec(10.0, -0.5)
    with pytest.raises(ValueError):
        sp.RieszSpec(10.0, 0.5, 0.5)
    w = sp.RieszSpec(10.0, 0.0).weights(np.array([1, 9, 11]))
    assert list(w) == [1.0, 1.0, 0.0]


def test_ground_state_eigenprojection():
    grid = Grid2D.square(8.0, 64)
    f = SampledField.from_function(grid, lambda x, y: np.exp(-(x * x + y * y) / 4.0))
    g = sp.projection_operator(1, grid).apply(f)
    assert (g - f).lp_norm(2.0) / f.lp_norm(2.0) < 1e-4


def _projected_bump(mu, grid):
    f = SampledField.from_function(grid, lambda x, y: np.exp(-((x - 0.7) ** 2 + (y + 0.4) ** 2)))
    return sp.projection_operator(mu, grid).apply(f)


@pytest.mark.parametrize("mu", [3, 9])
def test_eigenrelation_consistent_orientation(mu):
    # Pi_9 kernels reach |z - z'| ~ 8, so the box must be wider than that
    grid = Grid2D.square(12.0, 192)
    g = _projected_bump(mu, grid)
    lg = sp.apply_twisted_laplacian(g, "consistent")
    rel = (lg - g * mu).lp_norm(2.0) / g.lp_norm(2.0)
    assert rel < 2e-3
    other = sp.apply_twisted_laplacian(g, "as-written")
    assert (other - g * mu).lp_norm(2.0) / g.lp_norm(2.0) > 0.1
    two = sp.apply_twisted_laplacian_two_stage(g, "consistent")
    assert (two - g * mu).lp_norm(2.0) / g.lp_norm(2.0) < 1e-2


def test_stencil_needs_square_cells():
    grid = Grid2D(0, 1, 0, 2, 16, 16)
    with pytest.raises(sp.GridTooCoarseError):
        sp.apply_twisted_laplacian(SampledField(grid, np.zeros(grid.shape)))


@pytest.mark.parametrize("p,rel", [(2.0, 2e-5), (4.0, 1e-9), (math.inf, 1e-6)])
def test_riesz_eigensum_matches_oracle(p, rel):
    # odd n puts a node at the origin, where the sup is attained; the p = 2 norm
    # sees the small oscillating tail beyond the grid edge
    grid = Grid2D.square(8.0, 97)
    f = SampledField.from_function(grid, lambda x, y: np.exp(-(x * x + y * y)))
    spec = sp.RieszSpec(17.0, 0.5, p)
    err = (sp.riesz_mean_eigensum(spec, f) - f).lp_norm(p)
    assert err == pytest.approx(sp.riesz_error_gaussian(1.0, spec), rel=rel)


def test_riesz_mean_radial_large_lambda_converges():
    c = sp.gaussian_coefficients(1.0, 200)
    r = np.linspace(0, 3, 7)
    s = sp.riesz_mean_radial(sp.RieszSpec(1e6, 1.0), c, r)
    assert np.allclose(s, np.exp(-r * r), atol=1e-5)


def test_export_roundtrip(tmp_path):
    kern = sp.projection_operator(3, Grid2D.square(2.0, 8))
    b, j = sp.export_kernel(tmp_path / "pi3", kern, {"tag": "x"})
    mat, info = sp.load_kernel(tmp_path / "pi3")
    assert np.array_equal(mat, kern.matrix)
    assert info["mu"] == 3 and info["tag"] == "x" and b.stat().st_size == mat.size * 16


def test_projection_norm_trend_rejects_small_p():
    with pytest.raises(ValueError):
        sp.projection_norm_trend([1, 3], 4.0)
