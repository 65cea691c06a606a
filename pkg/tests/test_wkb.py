import math

import numpy as np
import pytest
from scipy.special import binom

from slestates.background import desitter, minkowski, power_law, preinflation, tabulated
from slestates.exceptions import CapabilityError, DomainError
from slestates.sle_core import sle_state
from slestates.wkb import (gd_coeffs, gd_expressions, gelfand_dickey_residual, two_point_wkb,
                           wkb_modulus_asymptote, wkb_phase_asymptote, wkb_s_coeffs)


def test_constant_frequency_coefficients():
    # 1/(2 sqrt(p^2 + v)) = (1/2p) sum binom(-1/2, n) (v/p^2)^n
    v = 2.0
    hk = gd_coeffs(minkowski(math.sqrt(v)), 4)
    tau = np.array([0.0, 0.5])
    for n in range(1, 5):
        assert np.allclose(hk(n, tau), (-1) ** n * binom(-0.5, n) * v ** n, rtol=1e-12)


def test_desitter_coefficients():
    H = 1.3
    bg = desitter(H)
    hk = gd_coeffs(bg, 4)
    tau = bg.tau_of_t(np.array([-1.0, 0.2, 0.5]))
    a = bg.a(tau)
    assert np.allclose(hk(1, tau), -H * H * a * a, rtol=1e-11)
    for n in range(2, 5):
        # exact zero; G_4 carries ~1e-8 cancellation error among its terms
        assert np.all(np.abs(hk(n, tau)) < 1e-6 * (H * a) ** (2 * n))


def test_kinetic_coefficient():
    H = 0.8
    bg = power_law(0.0, H)
    tau = bg.tau_of_t(np.array([-0.2, 0.3]))
    assert np.allclose(gd_coeffs(bg, 1)(1, tau), 0.5 * H * H * bg.a(tau) ** -4, rtol=1e-11)


def test_recursion_matches_closed_forms():
    bg = power_law(1.0, 1.0, m0=0.5)
    tau = bg.tau_of_t(np.linspace(-0.3, 0.6, 7))
    hk = gd_coeffs(bg, 3)
    G = hk.values(tau)
    scale = np.max(G[1] ** 2 + np.abs(G[2]))
    assert np.max(np.abs(hk.closed_form(1, tau) - G[1])) < 1e-11 * np.max(np.abs(G[1]))
    assert np.max(np.abs(hk.closed_form(2, tau) - G[2])) < 1e-10 * scale
    assert np.max(np.abs(hk.conformal_g2(tau) - G[2])) < 1e-10 * scale
    assert np.max(hk.recursion_residual(tau)) < 1e-10


def test_capabilities():
    x = np.linspace(0.0, 1.0, 101)
    tab = tabulated(x, 1 + 0.1 * x, gauge="proper")
    gd_coeffs(tab, 2)
    with pytest.raises(CapabilityError):
        gd_coeffs(tab, 3)
    with pytest.raises(DomainError):
        gd_coeffs(minkowski(1.0), 5)
    with pytest.raises(DomainError):
        wkb_s_coeffs(preinflation(1.0), 2, (-0.2, 0.2))
    assert len(gd_expressions(2)) == 3


def test_s_coefficients():
    bg = power_law(0.0, 1.0)
    tt = np.linspace(-0.6, -0.3, 9)
    wc = wkb_s_coeffs(bg, 4, (tt[0], tt[-1]))
    hk = gd_coeffs(bg, 2)
    assert max(wc.wronskian_conditions()) < 1e-12
    assert np.max(np.abs(wc.V(2, tt, tt) - hk(1, tt))) < 1e-10 * np.max(np.abs(hk(1, tt)))
    assert np.max(np.abs(wc.V(4, tt, tt) - hk(2, tt))) < 1e-5 * np.max(np.abs(hk(1, tt))) ** 2
    # the truncated mode is normalized up to O(p^-(N+2)) for even N
    ps = np.array([50.0, 100.0, 200.0])
    for N in (2, 4):
        err = []
        for p in ps:
            S, dS = wc.mode(p, tt, N)
            err.append(np.max(np.abs(dS * np.conj(S) - S * np.conj(dS) + 1j)))
        assert np.polyfit(np.log(ps), np.log(err), 1)[0] < -(N + 1.5)


def test_minkowski_asymptotes():
    m, p = 1.0, 30.0
    bg = minkowski(m)
    hk = gd_coeffs(bg, 4)
    om = math.sqrt(p * p + m * m)
    tau = np.array([0.0, 0.4])
    assert np.max(np.abs(wkb_modulus_asymptote(hk, p, tau) * 2 * om - 1)) < 1e-13
    ph = wkb_phase_asymptote(hk, p, tau, -0.3)
    assert np.max(np.abs(ph + om * (tau + 0.3))) < 1e-11
    wc = wkb_s_coeffs(bg, 4, (-1.0, 1.0))
    W = two_point_wkb(wc, p, tau, np.array([0.1, -0.2]))
    exact = np.exp(-1j * om * (tau - np.array([0.1, -0.2]))) / (2 * om)
    assert np.max(np.abs(W / exact - 1)) < 1e-8


def test_gelfand_dickey_residual_of_sle(kinetic):
    bg, f = kinetic
    r = sle_state(bg, f, 5.0)
    assert gelfand_dickey_residual(bg, r.mode, 5.0) < 1e-10
    tau = r.mode.grid.points
    assert gelfand_dickey_residual(bg, (tau, r.modulus_sq()), 5.0) < 1e-6
    # an unnormalized solution fails
    assert gelfand_dickey_residual(bg, (tau, 4 * r.modulus_sq()), 5.0) > 0.1
