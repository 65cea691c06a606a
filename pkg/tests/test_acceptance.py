"""Acceptance criteria, one test per criterion.

Each test records a one-line PASS/FAIL summary that is printed in the
pytest terminal summary ("acceptance criteria" section).
"""

import json
import math

import numpy as np
import pytest
import sympy as sp

from conftest import record
from slestates.background import (abar, custom, desitter, minkowski, power_law, preinflation,
                                  window_family)
from slestates.cli import main, random_bogoliubov
from slestates.modes import (commutator, delta_identity_residual, energy_density_identity,
                             ermakov_residual, gaussian_covariance, working_grid)
from slestates.numerics import Grid, bessel_jy
from slestates.preinflation import (PreInflationModel, matching_coeffs, p_grid, power_spectrum,
                                    spectrum_scan)
from slestates.sle_core import (_jk_arrays, default_fiducial, energy_functionals,
                                instantaneous_limit_probe, jk_functionals, quadrature,
                                sle_from_fiducial, sle_state)
from slestates.smallp import ir_limit, partial_sum_residual, series_fiducial
from slestates.wkb import gd_coeffs, wkb_modulus_asymptote

MOMENTA = (0.1, 1.0, 10.0)


def _builtins():
    """(name, background, window, momentum scale) for every built-in."""
    prop = window_family(-1.0, 1.0, 0.5, convention="proper")
    cases = [("minkowski(m0=1)", minkowski(1.0), prop),
             ("minkowski(m0=0)", minkowski(0.0), prop)]
    # the nu=1 expansion ends at eta = 0.5, so its window stops short of that
    for name, bg, eta2 in (("power_law(nu=0)", power_law(0.0, 1.0), 0.5),
                           ("power_law(nu=1, m0=0.5)", power_law(1.0, 1.0, m0=0.5), 0.4),
                           ("desitter", desitter(1.0), 0.5),
                           ("preinflation", preinflation(1.0), 0.5)):
        cases.append((name, bg, window_family(-0.3, eta2, 0.5, background=bg)))
    return [(n, bg, f, 1.0) for n, bg, f in cases]


def _finish(number, ok, detail):
    record(number, ok, detail)
    assert ok, detail


# 1 ----------------------------------------------------------------------

def test_01_bogoliubov_invariance():
    pairs = random_bogoliubov(np.random.Generator(np.random.PCG64(42)), 20)
    cases = [(n, bg, f) for n, bg, f, _ in _builtins()
             if n in ("minkowski(m0=1)", "power_law(nu=0)", "preinflation")]
    dev_T = dev_E = 0.0
    for _, bg, f in cases:
        grid = working_grid(bg, f, 256)
        for p in MOMENTA:
            fid = default_fiducial(bg, f, p, grid)
            ref = sle_from_fiducial(fid, f, bg)
            mod = np.abs(ref.mode.value)
            for a, b in pairs:
                r = sle_from_fiducial(fid.rotated(a, b), f, bg)
                dev_T = max(dev_T, float(np.max(np.abs(np.abs(r.mode.value) / mod - 1))))
                dev_E = max(dev_E, abs(r.energy / ref.energy - 1))
    _finish(1, dev_T < 1e-6 and dev_E < 1e-8,
            f"Bogoliubov invariance: max |T| dev {dev_T:.2e} (<1e-6), E dev {dev_E:.2e} (<1e-8)")


# 2 and 3 ----------------------------------------------------------------

@pytest.fixture(scope="module")
def route_pairs():
    out = []
    for name, bg, f, scale in _builtins():
        for q in MOMENTA:
            p = q * scale
            c = sle_state(bg, f, p, route="commutator")
            d = sle_state(bg, f, p, route="fiducial", grid=c.mode.grid)
            out.append((name, p, bg, f, c, d))
    return out


def test_02_route_equivalence(route_pairs):
    worst, where = 0.0, ""
    for name, p, _, _, c, d in route_pairs:
        dev = float(np.max(np.abs(c.modulus_sq() / d.modulus_sq() - 1)))
        if dev >= worst:
            worst, where = dev, f"{name}, p={p}"
    _finish(2, worst < 1e-6, f"route equivalence: max modulus dev {worst:.2e} (<1e-6) at {where}")


def test_03_minimizer_is_zero_of_D(route_pairs):
    worst = 0.0
    for _, _, bg, f, c, d in route_pairs:
        for r in (c, d):
            pair = energy_functionals(r.mode, f, bg)
            worst = max(worst, abs(pair.c2) / pair.c1)
    _finish(3, worst < 1e-7, f"minimizer: max |D|/E {worst:.2e} (<1e-7)")


# 4 ----------------------------------------------------------------------

def test_04_identity_suite():
    rng = np.random.default_rng(42)
    worst = dict(disc=0.0, jrec=0.0, delta=0.0, ermakov=0.0, schroed=0.0)
    for _, bg, f, scale in _builtins():
        for p in (0.3 * scale, 3.0 * scale):
            lo, hi = f.tau_support(bg)
            tau_r = 0.5 * (lo + hi)
            table = commutator(bg, p, Grid.uniform(lo, hi, 64), tau_r)
            jk = jk_functionals(table, f, bg)
            grid = working_grid(bg, f, 256)
            fid = default_fiducial(bg, f, p, grid)
            pair = energy_functionals(fid, f, bg)
            worst["disc"] = max(worst["disc"], abs(jk.discriminant / (4 * pair.invariant) - 1))
            nodes, weights = quadrature(bg, f, p)
            t = rng.uniform(lo, hi, 50)
            J_t = _jk_arrays(table, nodes, weights, t)[0]
            D, D0 = table.delta(t, tau_r), table.d_taup(t, tau_r)
            lhs = jk.K * D ** 2 + jk.J * D0 ** 2 - D * D0 * jk.Jdot
            worst["jrec"] = max(worst["jrec"], float(np.max(np.abs(lhs - J_t)) / np.max(J_t)))
            t1, t2, t3 = (rng.uniform(lo, hi, 100) for _ in range(3))
            res = delta_identity_residual(table, t1, t2, t3)
            worst["delta"] = max(worst["delta"], float(np.max(res)))
            sle = sle_from_fiducial(fid, f, bg)
            worst["ermakov"] = max(worst["ermakov"], float(np.max(ermakov_residual(sle.mode, bg))))
            a, b = gaussian_covariance(sle.mode, grid.points)
            e1, e2 = energy_density_identity(sle.mode, f, bg)
            worst["schroed"] = max(worst["schroed"], float(np.max(np.abs(a - b) / np.abs(b))),
                                   abs(e1 / e2 - 1))
    ok = (worst["disc"] < 1e-8 and worst["jrec"] < 1e-7 and worst["delta"] < 1e-7
          and worst["ermakov"] < 1e-6 and worst["schroed"] < 1e-6)
    _finish(4, ok, "identities: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
            + " (bounds 1e-8, 1e-7, 1e-7, 1e-6, 1e-6)")


# 5 ----------------------------------------------------------------------

def test_05_minkowski_closed_form():
    bg = minkowski(1.0)
    f = window_family(-1.0, 1.0, 0.5, convention="proper")
    worst = 0.0
    for p in (0.0, 0.5, 5.0):
        r = sle_state(bg, f, p)
        worst = max(worst, float(np.max(np.abs(r.modulus_sq() - 0.5 / math.sqrt(1 + p * p)))))
    _finish(5, worst < 1e-8, f"Minkowski closed form: max abs error {worst:.2e} (<1e-8)")


# 6 ----------------------------------------------------------------------

def test_06_instantaneous_limit():
    bg = power_law(0.0, 1.0)
    widths = 0.2 * 0.5 ** np.arange(5)
    rec = instantaneous_limit_probe(bg, 2.0, -0.2, widths)
    ok = bool(np.all(np.diff(rec.errors) < 0) and np.min(rec.orders) >= 1.0)
    _finish(6, ok, f"instantaneous limit: errors {rec.errors[0]:.1e} -> {rec.errors[-1]:.1e}, "
                   f"min empirical order {np.min(rec.orders):.2f} (>=1)")


# 7 ----------------------------------------------------------------------

def test_07_massless_ir():
    worst_mod = worst_im = worst_E = 0.0
    for bg in (power_law(0.0, 1.0), preinflation(1.0)):
        f = window_family(-0.3, 0.5, 0.5)
        rec = ir_limit(bg, f, [1e-2, 3e-3, 1e-3])
        worst_mod = max(worst_mod, rec.relative_error)
        worst_im = max(worst_im, rec.imag_two_point_error)
        worst_E = max(worst_E, abs(rec.energy_ratio - 1))
    ok = worst_mod < 1e-3 and worst_im < 1e-4 and worst_E < 1e-3
    _finish(7, ok, f"massless IR at p=1e-3: 2p|T|^2/abar-1 {worst_mod:.1e} (<1e-3), "
                   f"Im W err {worst_im:.1e} (<1e-4), E ratio-1 {worst_E:.1e} (<1e-3)")


# 8 ----------------------------------------------------------------------

def test_08_smallp_order():
    cases = [(preinflation(1.0), window_family(-0.3, 0.5, 0.5)),
             (power_law(0.0, 1.0), window_family(-0.3, 0.5, 0.5)),
             (minkowski(1.0), window_family(-1.0, 1.0, 0.5, convention="proper"))]
    slopes = []
    for bg, f in cases:
        sol = series_fiducial(bg, 3, f=f)
        ps = np.geomspace(sol.p_star / 20, sol.p_star / 2, 5)
        for N in (1, 2, 3):
            r = [partial_sum_residual(sol, p, N) for p in ps]
            slopes.append((N, float(np.polyfit(np.log(ps), np.log(r), 1)[0])))
    ok = all(abs(s - (2 * N + 2)) <= 0.3 for N, s in slopes)
    per_N = {N: [round(s, 2) for M, s in slopes if M == N] for N in (1, 2, 3)}
    _finish(8, ok, f"small-p residual slopes (targets 4, 6, 8 +-0.3): {per_N}")


# 9 ----------------------------------------------------------------------

def test_09_wkb_asymptotics():
    # slowly varying, massless background where the large-p regime is clean
    t = sp.Symbol("t", real=True)
    bg = custom(1 + sp.tanh(t) / 5, 0, t, gauge="proper")
    hk = gd_coeffs(bg, 2)
    tt = np.linspace(-1.0, 1.0, 9)
    ps = np.array([20.0, 40.0, 80.0, 200.0])
    windows = [window_family(-6.0, 5.4, 0.5, convention="proper"),
               window_family(-8.0, 7.2, 1.0, convention="proper"),
               window_family(-7.0, 6.3, 0.3, convention="proper")]
    slopes, coeff, moduli = [], [], []
    for f in windows:
        errs, mods = [], []
        for p in ps:
            m = sle_state(bg, f, p).modulus_sq(tt)
            errs.append(np.max(np.abs(m - wkb_modulus_asymptote(hk, p, tt, 1))))
            mods.append(m)
        slopes.append(float(np.polyfit(np.log(ps), np.log(errs), 1)[0]))
        coeff.append(errs[-1] * ps[-1] ** 5)
        moduli.append(mods[-1])
    spread = max(coeff) / min(coeff) - 1
    mod_spread = float(np.max(np.abs(np.array(moduli) / moduli[0] - 1)))
    # G_2 recursion vs closed forms on backgrounds with non-trivial G_2
    gd_err = 0.0
    for b, x in ((power_law(1.0, 1.0, m0=0.5), np.linspace(-0.3, 0.6, 9)),
                 (power_law(0.0, 1.0), np.linspace(-0.4, 0.4, 9)), (bg, tt)):
        h = gd_coeffs(b, 2)
        tau = b.tau_of_t(x)
        G = h.values(tau)
        scale = np.max(G[1] ** 2 + np.abs(G[2]))
        gd_err = max(gd_err, np.max(np.abs(h.closed_form(2, tau) - G[2])) / scale,
                     np.max(np.abs(h.conformal_g2(tau) - G[2])) / scale)
    # the residual at p=200 sits near 1e-13 relative, so a few percent is quadrature noise
    ok = (all(abs(s + 5) <= 0.3 for s in slopes) and gd_err < 1e-7
          and spread < 0.05 and mod_spread < 1e-9)
    _finish(9, ok, f"WKB: error slopes {[round(s, 2) for s in slopes]} (-5+-0.3), G2 rel err "
                   f"{gd_err:.1e} (<1e-7), window spread of error coeff {spread:.1e}, "
                   f"of |T|^2 at p=200 {mod_spread:.1e}")


# 10, 11 -----------------------------------------------------------------

@pytest.fixture(scope="module")
def model():
    return PreInflationModel(1.0)


DEFAULT_WINDOW = window_family(-0.3, 0.5, 0.5)


def _running_mean(x, y, width):
    """Mean of y over a sliding window of ``width`` in x."""
    return np.array([np.mean(y[np.abs(x - xi) <= width / 2]) for xi in x])


def test_10_uv_plateau(model):
    ps = np.geomspace(40.0, 250.0, 240)
    Pn = np.array([power_spectrum(model, DEFAULT_WINDOW, p) for p in ps]) * (2 * math.pi) ** 2
    # the residual oscillation has a period in p of about pi / (support length in eta)
    period = math.pi / 0.8
    avg = _running_mean(ps, Pn, 5 * period)
    sel = (ps >= 50) & (ps <= 200)
    slope = float(np.polyfit(np.log(ps[sel]), np.log(avg[sel]), 1)[0])
    ok = bool(np.all((avg[sel] >= 0.98) & (avg[sel] <= 1.02)) and abs(slope) <= 0.05)
    _finish(10, ok, f"UV plateau: averaged P(2pi)^2/H^2 in [{avg[sel].min():.5f}, "
                    f"{avg[sel].max():.5f}] (within [0.98, 1.02]), slope {slope:.1e} (0+-0.05)")


def test_11_ir_behaviour(model):
    ab = abar(model.background, DEFAULT_WINDOW)
    ratio = power_spectrum(model, DEFAULT_WINDOW, 1e-2) * (2 * math.pi) ** 2 / (1e-4 * ab)
    ps = np.geomspace(1e-3, 1e-2, 6)
    P = [power_spectrum(model, DEFAULT_WINDOW, p) for p in ps]
    slope = float(np.polyfit(np.log(ps), np.log(P), 1)[0])
    ok = 0.98 <= ratio <= 1.02 and abs(slope - 2) <= 0.05
    _finish(11, ok, f"IR: P(2pi)^2/(p^2 abar) at 1e-2 H = {ratio:.5f} ([0.98, 1.02]), "
                    f"slope {slope:.4f} (2+-0.05)")


# 12 ---------------------------------------------------------------------

def test_12_spectrum_shape(model):
    ps = p_grid(1e-2, 2e2, 200)
    full = spectrum_scan(model, DEFAULT_WINDOW, ps)
    kin = spectrum_scan(model, window_family(-0.3, 0.0, 0.5), ps)
    y = full.normalized
    low = ps <= 0.1
    rise = float(np.polyfit(np.log(ps[low]), np.log(y[low]), 1)[0])
    mid = (ps >= 0.5) & (ps <= 20)
    d = np.diff(y[mid])
    turns = int(np.sum(np.sign(d[1:]) != np.sign(d[:-1])))
    plateau = float(np.max(np.abs(y[ps >= 20] - 1)))
    differs = float(np.max(np.abs(kin.normalized[mid] / y[mid] - 1)))
    ok = (abs(rise - 2) < 0.05 and turns >= 2 and y[mid].max() > 1.05 and plateau < 0.02
          and kin.window["kinetic_only"] and not full.window["kinetic_only"] and differs > 0.05)
    _finish(12, ok, f"spectrum shape: low-p slope {rise:.3f}, {turns} turning points in crossover "
                    f"(peak {y[mid].max():.3f}), plateau dev {plateau:.1e}; kinetic-only window "
                    f"flagged, differs by up to {differs:.0%} in crossover")


# 13 ---------------------------------------------------------------------

def test_13_special_functions(model):
    x = np.geomspace(1e-3, 1e3, 50)
    J0, Y0 = bessel_jy(0, x)
    J1, Y1 = bessel_jy(1, x)
    wr = float(np.max(np.abs((J1 * Y0 - J0 * Y1) * math.pi * x / 2 - 1)))
    bog = max(abs(abs(a) ** 2 - abs(b) ** 2 - 1)
              for a, b in (matching_coeffs(model, p) for p in p_grid(1e-2, 2e2, 200)))
    _, b = matching_coeffs(model, 100.0)
    beta = abs(abs(b) ** 2 * 16 * 100.0 ** 4 / 9 - 1)
    ok = wr < 1e-10 and bog < 1e-9 and beta < 0.05
    _finish(13, ok, f"special functions: Bessel Wronskian {wr:.1e} (<1e-10), "
                    f"||alpha|^2-|beta|^2-1| {bog:.1e} (<1e-9), beta asymptote {beta:.1e} (<5%)")


# 14 ---------------------------------------------------------------------

def test_14_determinism(tmp_path):
    configs = {
        "solve": "background = power_law\nsolve.p = 3\ngrid.size = 64\n",
        "spectrum": "background = preinflation\np.count = 12\n",
        "verify": "background = power_law\ngrid.size = 64\nseed = 99\n",
    }
    same = True
    for cmd, text in configs.items():
        cfg = tmp_path / f"{cmd}.cfg"
        cfg.write_text(text)
        extra = ["--suite", "invariance"] if cmd == "verify" else []
        for run in ("a", "b"):
            assert main([cmd, "--config", str(cfg), "--out", str(tmp_path / run / cmd), *extra]) == 0
        for f in sorted((tmp_path / "a" / cmd).iterdir()):
            same &= f.read_bytes() == (tmp_path / "b" / cmd / f.name).read_bytes()
            if f.suffix == ".json":
                json.loads(f.read_text())
    _finish(14, same, "determinism: repeated solve/spectrum/verify runs byte-identical")
