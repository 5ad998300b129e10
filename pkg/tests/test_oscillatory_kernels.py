import math

import numpy as np
import pytest

from twisted_riesz import oscillatory_kernels as ok
from twisted_riesz.discretization import Grid2D
from twisted_riesz.propagator import SingularTimeError

# [DERIVED] values from an independent mpmath evaluation (50 digits, adaptive tanh-sinh).
BUMP = (math.pi / 4, 3 * math.pi / 4)
Z, ZP = np.array([0.7, 0.2]), np.array([-0.1, 0.3])
BRACKET_16 = -0.013538982444957404907 - 0.049071885541830167551j
FOURIER_3_5 = 0.3456808920250690318 - 0.3456808920250690318j
L1 = 0.94789729664649612276
HAT_PSI_2_05_07 = -0.25778717695162313844 - 1.2056297401008309914j


def test_bracket_kernel_frozen():
    w = ok.WindowedSymbol.interval(*BUMP, 16.0)
    assert abs(ok.bracket_kernel(w, Z, ZP) - BRACKET_16) < 1e-12


def test_bracket_kernel_certified():
    w = ok.WindowedSymbol.interval(*BUMP, 16.0)
    val, change = ok.bracket_kernel_certified(w, Z, ZP)
    assert change < 1e-12
    assert abs(val - BRACKET_16) < 1e-12


def test_window_fourier_and_l1_frozen():
    w = ok.WindowedSymbol.interval(*BUMP, 16.0)
    assert abs(ok.window_fourier(w, np.array(3.5)) - FOURIER_3_5) < 1e-13
    assert ok.window_l1(w) == pytest.approx(L1, abs=1e-13)


def test_hat_psi_frozen():
    assert abs(ok.hat_psi_ell_delta(2, 0.5, 0.7) - HAT_PSI_2_05_07) < 1e-12


def test_hat_psi_table_matches_direct():
    tab = ok.HatPsiTable(3, 0.5, 0.3, 40.0)
    t = np.linspace(-30.0, 30.0, 13)
    assert np.max(np.abs(tab(t) - ok.hat_psi_ell_delta(3, 0.5, t - 0.3j))) < 1e-10


def test_hat_psi_validation():
    with pytest.raises(ValueError):
        ok.hat_psi_ell_delta(-1, 0.5, 0.0)
    with pytest.raises(ValueError):
        ok.hat_psi_ell_delta(2, -0.1, 0.0)
    with pytest.raises(ValueError):
        ok.HatPsiTable(0, 0.5, 0.3, 10.0)


def test_eta0_contour_independent_of_depth():
    # hat psi is entire, so moving the local contour must not change the integral
    r2 = np.array([0.0, 0.01, 0.3])
    a = ok.bracket_kernel_r2(ok.eta_eta_psi_window("eta0", 2, 0.5, 0, 32.0), r2)
    b = ok.bracket_kernel_r2(ok.eta_eta_psi_window("eta0", 2, 0.5, 0, 32.0, eps=0.5 * ok.ETA0_CONTOUR_EPS), r2)
    assert np.max(np.abs(a - b)) < 1e-10 * np.max(np.abs(a))


def test_eta0_on_real_axis_is_singular():
    w = ok.eta_eta_psi_window("eta0", 2, 0.5, 0, 32.0, eps=0.0)
    with pytest.raises(SingularTimeError):
        ok.bracket_kernel_r2(w, np.array([0.1]))


def test_pieces_resum_to_full_kernel():
    w = ok.WindowedSymbol.interval(0.2, math.pi - 0.2, 64.0)
    r2 = np.linspace(0.5, 15.0, 9)
    full = ok.bracket_kernel_r2(w, r2)
    total = sum(ok.decomposed_kernel_r2(w, p, r2) for p in ok.all_pieces(w))
    assert np.max(np.abs(full - total)) < 1e-12


def test_l_pieces_resum_to_j_piece():
    w = ok.WindowedSymbol.interval(0.2, math.pi - 0.2, 64.0)
    r2 = np.linspace(0.5, 15.0, 9)
    j = 3
    jp = ok.decomposed_kernel_r2(w, ("j", j), r2)
    parts = sum(ok.decomposed_kernel_r2(w, ("jl", j, l), r2) for l in range(4))
    parts = parts + ok.decomposed_kernel_r2(w, ("jl-tail", j, 4), r2)
    assert np.max(np.abs(jp - parts)) < 1e-12


def test_unknown_piece_and_envelope_family():
    w = ok.WindowedSymbol.interval(*BUMP, 16.0)
    with pytest.raises(ValueError):
        ok.decomposed_kernel_r2(w, ("nope",), np.array([1.0]))
    with pytest.raises(ValueError):
        ok.KernelEnvelope("nope")


def test_exterior_envelope_stable():
    rep = ok.envelope_check(ok.KernelEnvelope("exterior"), [64.0, 128.0, 256.0])
    assert rep.passed


def test_b_l_envelope_in_regime():
    # |2l - j| large: the l-window stays away from the stationary time
    rep = ok.envelope_check(ok.KernelEnvelope("b_l", j=8, l=8), [64.0, 128.0, 256.0])
    assert rep.passed
    assert max(rep.values) / min(rep.values) < 2.0


@pytest.mark.slow
def test_tiling_split_sums_to_full():
    near, far, full = ok.tiling_split(32.0, 2, 0, Grid2D.square(0.75, 6))
    assert np.max(np.abs(near.matrix + far.matrix - full.matrix)) == 0.0
    assert np.count_nonzero(far.matrix) > 0
