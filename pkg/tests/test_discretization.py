import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twisted_riesz import discretization as d
from twisted_riesz import quadrature as q
from twisted_riesz.propagator import cross_term, dist2


def test_grid_geometry():
    g = d.Grid2D.square(2.0, 8)
    assert g.weights.sum() == pytest.approx(16.0)
    assert g.xs[0] == pytest.approx(-1.75) and g.points().shape == (64, 2)
    assert g.refine().nx == 16


def test_radial_grid_area():
    rg = d.RadialGrid(3.0, 10)
    assert rg.weights.sum() == pytest.approx(math.pi * 9.0, rel=1e-13)


@given(st.floats(min_value=1.0, max_value=8.0))
def test_lp_norm_of_constant(p):
    w = np.full(10, 0.1)
    assert d.lp_norm(np.full(10, 2.0), w, p) == pytest.approx(2.0)


def _radial(r2):
    return np.exp(-r2) * (1.0 + 0.3j * r2)


@pytest.mark.parametrize("cache", [600 << 20, 4096])
def test_twisted_convolution_matches_dense(cache, rng):
    g = d.Grid2D.square(3.0, 20)
    op = d.TwistedConvolution.from_radial(g, _radial, 0.5, cache_bytes=cache)
    pts = g.points()
    k = _radial(dist2(pts[:, None], pts[None])) * np.exp(1j * cross_term(pts[:, None], pts[None]))
    dense = d.DenseOperator.on_grids(k, g, g)
    f = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
    assert np.allclose(op.matvec(f), dense.matvec(f), atol=1e-12)
    assert np.allclose(op.rmatvec(f), dense.rmatvec(f), atol=1e-12)
    assert np.allclose(op.abs_row_sums(), dense.abs_row_sums(), atol=1e-12)


def test_adjoint_identity(rng):
    g = d.Grid2D.square(2.0, 12)
    op = d.TwistedConvolution.from_radial(g, _radial, 0.5)
    f = rng.standard_normal(g.size) + 0j
    h = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
    assert op.inner(op.matvec(f), h) == pytest.approx(op.inner(f, op.rmatvec(h), side="src"), abs=1e-12)


def test_low_rank_dense_agree(rng):
    left, right = rng.standard_normal((30, 4)), rng.standard_normal((20, 4))
    core = rng.standard_normal(4) + 1j
    op = d.LowRankOperator(left, core, right, np.full(20, 0.5), np.full(30, 0.2))
    dense = d.DenseOperator(op.to_dense(), op.src_weights, op.tgt_weights)
    f = rng.standard_normal(20)
    assert np.allclose(op.matvec(f), dense.matvec(f))
    assert np.allclose(op.abs_row_sums(), dense.abs_row_sums())


def test_discretize_memory_cap():
    g = d.Grid2D.square(1.0, 64)
    with pytest.raises(d.MemoryCapExceededError):
        d.discretize(lambda z, zp: dist2(z, zp), g, g, memory_cap=1000)


def test_dense_shape_check():
    with pytest.raises(ValueError):
        d.DenseOperator(np.zeros((3, 2)), np.ones(3), np.ones(3))


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("TWISTED_RIESZ_THREADS", "3")
    assert d.worker_count() == 3
    monkeypatch.setenv("TWISTED_RIESZ_THREADS", "junk")
    assert d.worker_count() == 1
    monkeypatch.delenv("TWISTED_RIESZ_THREADS")
    assert d.worker_count() == 1


# quadrature ----------------------------------------------------------------


@pytest.mark.parametrize("n", [4, 16])
def test_gauss_legendre_exact_for_polynomials(n):
    x, w = q.gauss_legendre(n)
    for k in range(2 * n):
        assert np.sum(w * x**k) == pytest.approx((1 - (-1) ** (k + 1)) / (k + 1), abs=1e-13)


def test_composite_rule_oscillatory():
    t, w = q.composite_nodes(q.uniform_breaks(0.0, 10.0, 0.5), 16)
    assert np.sum(w * np.cos(7 * t)) == pytest.approx(math.sin(70.0) / 7.0, abs=1e-13)


def test_budget_breaks_follow_step():
    br = q.budget_breaks(0.0, 1.0, lambda t: 0.01 + 0.0 * t)
    assert len(br) - 1 == 100
    with pytest.raises(q.BudgetExceededError):
        q.budget_breaks(0.0, 1.0, lambda t: 1e-6 + 0.0 * t, max_panels=1000)
    with pytest.raises(ValueError):
        q.budget_breaks(1.0, 0.0, lambda t: t)


def test_richardson_removes_linear_and_quadratic_error():
    hs = np.array([0.4, 0.2, 0.1])
    vals = 2.0 + 3.0 * hs - 5.0 * hs**2
    best, resid = q.richardson(vals, hs)
    assert best == pytest.approx(2.0, abs=1e-13)
    # the residual compares with the two-point extrapolation, which keeps the h^2 term
    assert resid == pytest.approx(5.0 * 0.2 * 0.1, rel=1e-9)
    _, resid_lin = q.richardson(2.0 + 3.0 * hs, hs)
    assert resid_lin < 1e-13


def test_periodic_trapezoid():
    v = q.periodic_trapezoid(lambda t: np.exp(np.cos(t))[:, None] * np.ones(2), 2 * math.pi)
    from scipy.special import i0

    assert np.allclose(v, 2 * math.pi * i0(1.0), atol=1e-13)
