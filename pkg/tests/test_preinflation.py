import math

import numpy as np
import pytest

from slestates.background import abar, window_family
from slestates.exceptions import DomainError
from slestates.modes import solve_mode, working_grid
from slestates.preinflation import (PreInflationModel, fiducial_mode, fiducial_tau,
                                    matching_coeffs, matching_residual, p_grid, power_spectrum,
                                    power_spectrum_commutator, power_spectrum_fiducial, seed_value,
                                    smallp_extension_check, spectrum_scan)

WINDOW = window_family(-0.3, 0.5, 0.5)


@pytest.fixture(scope="module")
def model():
    return PreInflationModel(1.0)


@pytest.mark.parametrize("H", [1.0, 2.5])
def test_bogoliubov_and_matching(H):
    model = PreInflationModel(H)
    for p in np.geomspace(1e-2, 2e2, 40) * H:
        a, b = matching_coeffs(model, p)
        assert abs(abs(a) ** 2 - abs(b) ** 2 - 1) < 1e-9
        assert max(matching_residual(model, p)) < 1e-9
    _, b = matching_coeffs(model, 100.0 * H)
    assert abs(abs(b) ** 2 * 16 * 100.0 ** 4 / 9 - 1) < 0.05


@pytest.mark.parametrize("H", [1.0, 2.0])
def test_fiducial_is_normalized_and_solves_the_equation(H):
    model = PreInflationModel(H)
    p = 2.5 * H
    eta = np.array([-0.4, -0.1, 0.2, 0.6]) / H
    S, dS = fiducial_mode(model, p, eta)
    a2 = model.a_of_eta(eta) ** 2
    assert np.allclose(dS * np.conj(S) - S * np.conj(dS), -1j / a2, atol=1e-12)
    bg = model.background
    f = window_family(-0.3 / H, 0.5 / H, 0.5)
    lo, hi = f.tau_support(bg)
    z, w = fiducial_tau(model, p, np.array([lo]))
    grid = working_grid(bg, f, 128)
    ref = solve_mode(bg, f, p, (complex(z[0]), complex(w[0])), lo, grid)
    T, _ = fiducial_tau(model, p, grid.points)
    assert np.max(np.abs(T - ref.value)) < 1e-9


@pytest.mark.parametrize("H", [1.0, 2.0])
@pytest.mark.parametrize("p", [0.5, 3.0])
def test_seed_value_of_bunch_davies(H, p):
    # the Bunch-Davies branch tends to i H / sqrt(2 p^3) at the seed time
    model = PreInflationModel(H)
    tau = np.array([0.05, 0.2, 0.3]) / H
    X, dX = fiducial_tau(model, p, tau)
    val = seed_value(model, p, tau, X, dX)
    assert np.allclose(val, 1j * model.H / math.sqrt(2 * p ** 3), atol=1e-12)
    with pytest.raises(DomainError):
        seed_value(model, p, np.array([-0.1]), X[:1], dX[:1])


@pytest.mark.parametrize("p", [0.1, 1.0, 10.0])
def test_routes_agree(model, p):
    Pf = power_spectrum_fiducial(model, WINDOW, p)
    Pc = power_spectrum_commutator(model, WINDOW, p)
    assert abs(Pf / Pc - 1) < 1e-8
    assert power_spectrum(model, WINDOW, p) in (Pf, Pc)


def test_rotated_fiducial_and_window_scaling(model):
    p = 3.0
    P = power_spectrum_fiducial(model, WINDOW, p)
    rot = (math.cosh(1.2) * np.exp(0.3j), math.sinh(1.2) * np.exp(-1.1j))
    assert abs(power_spectrum_fiducial(model, WINDOW, p, rotation=rot) / P - 1) < 1e-10
    scaled = WINDOW.scaled(1.6)
    assert abs(power_spectrum(model, scaled, p) / P - 1) < 1e-12


def test_h_scaling():
    # P(p; H) = H^2 F(p / H) when the window scales with 1/H
    m1, m2 = PreInflationModel(1.0), PreInflationModel(2.0)
    f1, f2 = window_family(-0.3, 0.5, 0.5), window_family(-0.15, 0.25, 0.5)
    for x in (0.05, 2.0, 30.0):
        for route in ("commutator", "fiducial"):
            ratio = power_spectrum(m2, f2, 2.0 * x, route) / power_spectrum(m1, f1, x, route)
            assert abs(ratio / 4.0 - 1) < 1e-10


def test_infrared_and_plateau(model):
    ab = abar(model.background, WINDOW)
    P = power_spectrum(model, WINDOW, 1e-2)
    assert abs(P * (2 * math.pi) ** 2 / (1e-4 * ab) - 1) < 0.02
    hi = np.mean([power_spectrum(model, WINDOW, q) for q in np.geomspace(50, 200, 12)])
    assert abs(hi * (2 * math.pi) ** 2 - 1) < 0.02


def test_smallp_extension(model):
    rec = smallp_extension_check(model, WINDOW, [1e-3, 1e-2, 0.05])
    assert rec.max_relative_gap < 0.01


def test_spectrum_table(model):
    tab = spectrum_scan(model, WINDOW, p_grid(0.1, 10.0, 5))
    rows = list(tab.rows())
    assert len(rows) == 5 and np.all(tab.P > 0)
    assert np.allclose(tab.normalized, tab.P * (2 * math.pi) ** 2)
    assert not tab.window["kinetic_only"]
    kin = spectrum_scan(model, window_family(-0.3, 0.0, 0.5), [1.0])
    assert kin.window["kinetic_only"]
    assert p_grid(0.1, 10.0, 1).tolist() == [0.1]
    assert np.allclose(p_grid(1.0, 3.0, 3, "linear"), [1, 2, 3])
    with pytest.raises(DomainError):
        spectrum_scan(model, WINDOW, [2.0, 1.0])
    with pytest.raises(DomainError):
        p_grid(0.0, 1.0, 3)


def test_window_bounds(model):
    with pytest.raises(DomainError, match="1/H"):
        model.check_window(window_family(-0.3, 1.2, 0.5))
    with pytest.raises(DomainError, match="margin"):
        model.check_window(window_family(-0.4999, 0.5, 0.5))
    with pytest.raises(DomainError):
        PreInflationModel(-1.0)
    with pytest.raises(DomainError):
        fiducial_mode(model, 1.0, np.array([1.5]))
