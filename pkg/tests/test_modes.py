import math

import numpy as np
import pytest
from scipy import special

from slestates.background import minkowski, power_law, window_family
from slestates.exceptions import ContractError, DomainError
from slestates.modes import (commutator, delta_from_solution, delta_identity_residual,
                             energy_density_identity, ermakov_residual, gaussian_covariance,
                             solve_mode, wronskian, working_grid)
from slestates.numerics import Grid


def _plane_wave(bg, f, p, lo):
    om = math.sqrt(float(bg.omega_sq(p, lo)))
    return solve_mode(bg, f, p, (1 / math.sqrt(2 * om), -1j * math.sqrt(om / 2)), lo,
                      working_grid(bg, f, 256)), om


def test_minkowski_plane_wave(mink):
    bg, f = mink
    S, om = _plane_wave(bg, f, 2.0, -1.0)
    tau = S.grid.points
    exact = np.exp(-1j * om * (tau + 1.0)) / math.sqrt(2 * om)
    assert np.max(np.abs(S.value - exact)) < 1e-10
    assert S.wronskian_residual < 1e-10
    assert np.allclose(wronskian(S.value, S.derivative), -1j, atol=1e-10)


def test_kinetic_mode_against_hankel(kinetic):
    # T'' + p^2 e^{4 H tau} T = 0 is solved by H0^(2)(p e^{2 H tau} / (2H))
    bg, f = kinetic
    p, H = 3.0, 1.0
    lo, hi = f.tau_support(bg)
    x0 = p * math.exp(2 * H * lo) / (2 * H)
    c = math.sqrt(math.pi / (8 * H))
    h = c * special.hankel2(0, x0)
    dh = -c * 2 * H * x0 * special.hankel2(1, x0)
    S = solve_mode(bg, f, p, (h, dh), lo, working_grid(bg, f, 128))
    tau = np.linspace(lo, hi, 9)
    ref = c * special.hankel2(0, p * np.exp(2 * H * tau) / (2 * H))
    assert np.max(np.abs(S(tau)[0] - ref)) < 1e-10
    assert S.wronskian_residual < 1e-10


def test_commutator_closed_form(mink):
    bg, f = mink
    p = 1.5
    om = math.sqrt(1 + p * p)
    table = commutator(bg, p, Grid.uniform(-1.0, 1.0, 64))
    t = np.array([-0.9, 0.1, 0.7])
    s = np.array([0.3, -0.4, 0.7])
    assert np.allclose(table.delta(t, s), np.sin(om * (t - s)) / om, atol=1e-11)
    assert np.allclose(table.d_tau(s, s), 1.0, atol=1e-11)
    assert np.allclose(table.d_mixed(t, s), om * np.sin(om * (t - s)), atol=1e-10)
    S, _ = _plane_wave(bg, f, p, -1.0)
    assert np.allclose(delta_from_solution(S, t, s), table.delta(t, s), atol=1e-10)


def test_commutator_is_antisymmetric_and_satisfies_product_identity(kinetic, rng):
    bg, f = kinetic
    lo, hi = f.tau_support(bg)
    table = commutator(bg, 4.0, Grid.uniform(lo, hi, 64))
    t1, t2, t3 = (rng.uniform(lo, hi, 100) for _ in range(3))
    assert np.max(np.abs(table.delta(t1, t2) + table.delta(t2, t1))) < 1e-12
    assert np.max(delta_identity_residual(table, t1, t2, t3)) < 1e-10


def test_modulus_identities(kinetic):
    bg, f = kinetic
    lo, _ = f.tau_support(bg)
    S, _ = _plane_wave(bg, f, 2.0, lo)
    assert np.max(ermakov_residual(S, bg)) < 1e-9
    a, b = gaussian_covariance(S, S.grid.points[::17])
    assert np.max(np.abs(a - b)) < 1e-9 * np.max(np.abs(a))
    lhs, rhs = energy_density_identity(S, f, bg)
    assert abs(lhs / rhs - 1) < 1e-10


def test_solve_mode_rejects_bad_data(mink):
    bg, f = mink
    with pytest.raises(ContractError):
        solve_mode(bg, f, 1.0, (1.0, 0.0), -1.0, working_grid(bg, f, 64))
    with pytest.raises(DomainError):
        solve_mode(bg, f, -1.0, (1.0, -1j), -1.0, working_grid(bg, f, 64))
