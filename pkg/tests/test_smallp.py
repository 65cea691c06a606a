import math

import numpy as np
import pytest

from slestates.background import abar, minkowski, window_family
from slestates.exceptions import DomainError
from slestates.modes import solve_mode
from slestates.smallp import (commutator_series, contraction_radius, deltaexp_residuals,
                              fiducial_free_crosscheck, ir_limit, order_residuals,
                              partial_sum_residual, series_fiducial, sle_series)


def test_massless_minkowski_commutator_coefficients():
    cs = commutator_series(minkowski(0.0), 4, interval=(-1.0, 1.0))
    t = np.array([0.3, -0.5]); s = np.array([-0.7, 0.9])
    for n in range(5):
        # sin(p x)/p = sum (-1)^n p^{2n} x^{2n+1}/(2n+1)!
        ref = (-1) ** n * (t - s) ** (2 * n + 1) / math.factorial(2 * n + 1)
        assert np.allclose(cs.coefficient(n, t, s), ref, atol=1e-12)


def test_massive_minkowski_sle_series(mink):
    bg, f = mink
    ss = sle_series(bg, f, 4)
    assert ss.regime == "massive"
    # 1/(2 sqrt(1 + p^2)) = 1/2 - p^2/4 + 3p^4/16 - 5p^6/32 + 35p^8/256
    ref = [0.5, -0.25, 3 / 16, -5 / 32, 35 / 256]
    assert np.allclose(ss.modulus_coeffs[:, 0], ref, atol=1e-10)
    # E = (1/2) int f^2 sqrt(1 + p^2)
    half = ss.window_mass / 2
    assert np.allclose(ss.energy_coeffs / half, [1, 0.5, -0.125, 0.0625, -5 / 128], atol=1e-10)
    assert np.max(np.abs(ss.modulus_sq(0.2) - 0.5 / math.sqrt(1.04))) < 5e-8  # next term ~1.3e-8


def test_massless_regime_and_ir_coefficient(kinetic):
    bg, f = kinetic
    ss = sle_series(bg, f, 3)
    assert ss.regime == "massless"
    # leading term: 2 p |T|^2 -> abar
    assert np.max(np.abs(2 * ss.modulus_coeffs[0] - abar(bg, f))) < 1e-8


def test_partial_sum_solves_the_ode(kinetic):
    bg, f = kinetic
    lo, hi = f.tau_support(bg)
    sol = series_fiducial(bg, 6, interval=(lo, hi))
    p = 0.05
    S = sol.as_mode(p)
    z, w = sol.partial_sum(p, np.array([lo]))
    ref = solve_mode(bg, f, p, (complex(z[0]), complex(w[0])), lo, S.grid, check_normalization=False)
    assert np.max(np.abs(S.value - ref.value)) < 1e-10


@pytest.mark.parametrize("N", [1, 2, 3])
def test_residual_order(preinf, N):
    bg, f = preinf
    sol = series_fiducial(bg, 3, f=f)
    ps = np.geomspace(sol.p_star / 20, sol.p_star / 2, 4)
    r = [partial_sum_residual(sol, p, N) for p in ps]
    slope = np.polyfit(np.log(ps), np.log(r), 1)[0]
    assert abs(slope - (2 * N + 2)) < 0.3


def test_order_residuals_and_radius(kinetic):
    bg, f = kinetic
    sol = series_fiducial(bg, 3, f=f)
    assert max(order_residuals(sol)) < 1e-8
    radius = contraction_radius(sol)
    assert radius[0] > 0 if isinstance(radius, tuple) else radius > 0
    cs = commutator_series(bg, 3, series=sol)
    for rec, diag in deltaexp_residuals(cs, float(np.mean(sol.interval))):
        assert rec < 1e-6 and diag < 1e-10


def test_ir_limit(kinetic):
    bg, f = kinetic
    rec = ir_limit(bg, f, [1e-2, 3e-3, 1e-3])
    assert rec.relative_error < 1e-3
    assert rec.imag_two_point_error < 1e-4
    assert abs(rec.energy_ratio - 1) < 1e-3
    with pytest.raises(DomainError):
        ir_limit(minkowski(1.0), window_family(-1, 1, 0.5, convention="proper"), [0.1, 0.01])


def test_fiducial_free_crosscheck(kinetic):
    bg, f = kinetic
    rec = fiducial_free_crosscheck(bg, f, 1e-3)
    assert rec.two_point_deviation < 1e-6
    assert abs(rec.mu_scaled / rec.mu_scaled_target - 1) < 0.01


def test_order_cap(mink):
    bg, f = mink
    with pytest.raises(DomainError):
        series_fiducial(bg, 7, f=f)
