"""Kinetic domination followed by de Sitter: matched fiducial modes, SLE
energy pairs and the primordial power spectrum at the seed time eta = 1/H.

Conventions: conformal time eta, tau with d tau = d eta / a^2 (so the mode
equation is T'' + p^2 a^4 T = 0 and T(tau) = S(eta)), d = 3. The seed time
eta = 1/H is tau_* = 1/(3H). Values at tau_* are obtained by continuing a
solution exactly through the de Sitter branch, never by integrating into
the coordinate pole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .background import Background, WindowFunction, abar, default_panels, preinflation, window_rule
from .exceptions import ConsistencyError, DomainError
from .modes import commutator
from .numerics import Grid, hankel
from .sle_core import EnergyPair, minimize_bogoliubov

EDGE_MARGIN = 1e-3     # window margin from eta = -1/(2H), in units of 1/H
CROSSOVER = 1.0        # 'auto' route switches at p = CROSSOVER * H


@dataclass(frozen=True)
class PreInflationModel:
    H: float = 1.0
    background: Background = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.H) and self.H > 0):
            raise DomainError("H must be positive and finite")
        object.__setattr__(self, "background", preinflation(self.H))

    @property
    def eta_star(self) -> float:
        return 1.0 / self.H

    @property
    def tau_star(self) -> float:
        return 1.0 / (3.0 * self.H)

    def eta_of_tau(self, tau):
        return self.background.t_of_tau(tau)

    def tau_of_eta(self, eta):
        return self.background.tau_of_t(eta)

    def a_of_eta(self, eta):
        eta = np.asarray(eta, dtype=float)
        H = self.H
        kin = np.sqrt(np.maximum(1.0 + 2.0 * H * eta, 0.0))
        ds = 1.0 / np.where(eta >= 0, 1.0 - H * eta, 1.0)
        return np.where(eta < 0, kin, ds)

    def check_eta(self, eta):
        eta = np.asarray(eta, dtype=float)
        if np.any(eta <= -0.5 / self.H) or np.any(eta >= 1.0 / self.H):
            raise DomainError("eta outside the working interval (-1/(2H), 1/H)")

    def check_window(self, f: WindowFunction):
        lo, hi = f.support
        if lo < (-0.5 + EDGE_MARGIN) / self.H:
            raise DomainError(
                f"window starts at eta = {lo}; it must keep a margin of {EDGE_MARGIN}/H "
                "from -1/(2H)")
        if hi >= 1.0 / self.H:
            raise DomainError(f"window ends at eta = {hi}, at or beyond the bound 1/H = {1.0 / self.H}")


# ---------------------------------------------------------------------------
# fiducial solution


def matching_coeffs(model: PreInflationModel, p: float):
    """(alpha, beta) making alpha S^kin + beta S^kin* continue S^BD in C^1."""
    if not p > 0:
        raise DomainError("momentum must be positive")
    H = model.H
    y = p / (2.0 * H)
    pref = np.exp(1j * p / H) * math.sqrt(math.pi * p / (16.0 * H))
    k = H / p - 1j
    alpha = pref * (hankel(1, 0, y) - k * hankel(1, 1, y))
    beta = pref * (-hankel(2, 0, y) + k * hankel(2, 1, y))
    return complex(alpha), complex(beta)


def _kinetic(model: PreInflationModel, p: float, eta):
    """S^kin = sqrt(pi/(8H)) H0^(2)(p eta + p/(2H)) and its eta-derivative."""
    H = model.H
    y = p * (np.asarray(eta, dtype=float) + 0.5 / H)
    c = math.sqrt(math.pi / (8.0 * H))
    return c * hankel(2, 0, y), -c * p * hankel(2, 1, y)


def _bunch_davies(model: PreInflationModel, p: float, eta):
    """S^BD = (H/p)(x + i) e^{ix} / sqrt(2p), x = p(1 - H eta)/H, and dS/deta."""
    H = model.H
    x = p * (1.0 - H * np.asarray(eta, dtype=float)) / H
    e = np.exp(1j * x) / math.sqrt(2.0 * p)
    return (H / p) * (x + 1j) * e, -1j * H * x * e


def fiducial_mode(model: PreInflationModel, p: float, eta, coeffs=None):
    """Matched fiducial S_p(eta) and dS_p/deta."""
    if not p > 0:
        raise DomainError("momentum must be positive")
    eta = np.asarray(eta, dtype=float)
    model.check_eta(eta)
    alpha, beta = matching_coeffs(model, p) if coeffs is None else coeffs
    flat = np.atleast_1d(eta)
    S = np.empty(flat.shape, dtype=complex)
    dS = np.empty_like(S)
    kin = flat <= 0
    if np.any(kin):
        s, ds = _kinetic(model, p, flat[kin])
        S[kin] = alpha * s + beta * np.conj(s)
        dS[kin] = alpha * ds + beta * np.conj(ds)
    if np.any(~kin):
        S[~kin], dS[~kin] = _bunch_davies(model, p, flat[~kin])
    if eta.ndim == 0:
        return complex(S[0]), complex(dS[0])
    return S, dS


def fiducial_tau(model: PreInflationModel, p: float, tau, coeffs=None):
    """The fiducial as a function of tau: (T, dT/dtau) with dT/dtau = a^2 dS/deta."""
    tau = np.asarray(tau, dtype=float)
    eta = model.eta_of_tau(tau)
    S, dS = fiducial_mode(model, p, eta, coeffs)
    return S, model.background.a(tau) ** 2 * dS


def matching_residual(model: PreInflationModel, p: float):
    """Relative C^1 mismatch of the two branches at eta = 0."""
    alpha, beta = matching_coeffs(model, p)
    s, ds = _kinetic(model, p, 0.0)
    b, db = _bunch_davies(model, p, 0.0)
    left = alpha * s + beta * np.conj(s)
    dleft = alpha * ds + beta * np.conj(ds)
    return (abs(left - b) / abs(b), abs(dleft - db) / abs(db))


# ---------------------------------------------------------------------------
# exact continuation to the seed time


def _r1_over_x2(x):
    """(x cos x - sin x)/x^2, by its Taylor series for small x."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 0.1
    xs = x[small]
    acc = np.zeros_like(xs)
    term_sign = -1.0
    for k in range(1, 9):
        acc += term_sign * 2 * k * xs ** (2 * k - 1) / math.factorial(2 * k + 1)
        term_sign = -term_sign
    out[small] = acc
    xl = x[~small]
    out[~small] = (xl * np.cos(xl) - np.sin(xl)) / xl ** 2
    return out


def seed_value(model: PreInflationModel, p: float, tau, X, dX):
    """Value at tau_* of the solution with data (X, dX/dtau) at tau > 0.

    Writing X = A R1 + B R2 with R1 = x cos x - sin x, R2 = x sin x + cos x
    (x = p(1 - H eta)/H), B = (R1 X_x - R1_x X)/x^2 is the value at x = 0.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0) or np.any(tau >= model.tau_star):
        raise DomainError("continuation starts inside the de Sitter branch")
    H = model.H
    eta = model.eta_of_tau(tau)
    x = p * (1.0 - H * eta) / H
    a2 = model.background.a(tau) ** 2
    dX_eta = np.asarray(dX) / a2
    X_x = -dX_eta / p
    # R1_x / x^2 = -sin(x)/x
    return _r1_over_x2(x) * X_x + np.sinc(x / np.pi) * np.asarray(X)


# ---------------------------------------------------------------------------
# energy pair and power spectrum


def _rule(model: PreInflationModel, f: WindowFunction, p: float, n_panels: Optional[int]):
    model.check_window(f)
    bg = model.background
    return window_rule(bg, f, n_panels or default_panels(bg, f, p))


def sle_parameters(model: PreInflationModel, f: WindowFunction, p: float,
                   n_panels: Optional[int] = None, fiducial: Optional[Callable] = None) -> EnergyPair:
    """(c1, c2) of the matched fiducial (or of ``fiducial(tau) -> (T, dT)``)."""
    if not p > 0:
        raise DomainError("momentum must be positive")
    nodes, weights = _rule(model, f, p, n_panels)
    T, dT = fiducial_tau(model, p, nodes) if fiducial is None else fiducial(nodes)
    w2 = model.background.omega_sq(p, nodes)
    c1 = 0.5 * float(np.sum(weights * (np.abs(dT) ** 2 + w2 * np.abs(T) ** 2)))
    c2 = 0.5 * complex(np.sum(weights * (dT * dT + w2 * T * T)))
    return EnergyPair(c1, c2)


def _normalization(model: PreInflationModel) -> float:
    return model.H ** 2 / (2.0 * math.pi) ** 2


def power_spectrum_fiducial(model: PreInflationModel, f: WindowFunction, p: float,
                            n_panels: Optional[int] = None,
                            rotation: Optional[tuple] = None) -> float:
    """P from the energy pair of the matched fiducial (optionally Bogoliubov
    rotated by (a, b)); equals H^2/(2 pi)^2 (c1 + Re c2)/sqrt(c1^2 - |c2|^2)
    for the unrotated fiducial."""
    if rotation is None:
        pair = sle_parameters(model, f, p, n_panels)
        if not pair.c1 > abs(pair.c2):
            raise ConsistencyError(f"degenerate energy pair at p = {p}: c1 <= |c2|")
        return _normalization(model) * (pair.c1 + pair.c2.real) / pair.energy
    a, b = rotation
    coeffs = matching_coeffs(model, p)

    def rotated(tau):
        T, dT = fiducial_tau(model, p, tau, coeffs)
        return a * T + b * np.conj(T), a * dT + b * np.conj(dT)

    pair = sle_parameters(model, f, p, n_panels, fiducial=rotated)
    if not pair.c1 > abs(pair.c2):
        raise ConsistencyError(f"degenerate energy pair at p = {p}: c1 <= |c2|")
    co = minimize_bogoliubov(pair)
    s_star = 1j * model.H / math.sqrt(2.0 * p ** 3)     # S^BD at eta = 1/H
    r_star = a * s_star + b * np.conj(s_star)
    T_star = co.lam * r_star + co.mu * np.conj(r_star)
    return p ** 3 * abs(T_star) ** 2 / (2.0 * math.pi ** 2)


def _continuation_time(model: PreInflationModel, hi: float) -> float:
    """A de Sitter time at or after the window's end (eta >= 1/(2H))."""
    return max(hi, float(model.tau_of_eta(0.5 / model.H)))


def power_spectrum_commutator(model: PreInflationModel, f: WindowFunction, p: float,
                              n_panels: Optional[int] = None, tol: float = 1e-12) -> float:
    """P = p^3 J(tau_*) / (4 pi^2 E) from the commutator functionals.

    J(tau_*) is the quadratic form of the pair moments evaluated on the pair's
    values at tau_*, which come from the exact de Sitter continuation.
    """
    if not p > 0:
        raise DomainError("momentum must be positive")
    nodes, weights = _rule(model, f, p, n_panels)
    bg = model.background
    lo, hi = f.tau_support(bg)
    tm = _continuation_time(model, hi)
    table = commutator(bg, p, Grid.uniform(lo, tm, 64), tau_r=0.5 * (lo + hi), tol=tol)
    u, v, du, dv = table.pair(nodes)
    w2 = bg.omega_sq(p, nodes)
    A_uu = float(np.sum(weights * (du * du + w2 * u * u)))
    A_uv = float(np.sum(weights * (du * dv + w2 * u * v)))
    A_vv = float(np.sum(weights * (dv * dv + w2 * v * v)))
    disc = A_uu * A_vv - A_uv ** 2
    if not disc > 0:
        raise ConsistencyError(f"degenerate commutator data at p = {p}")
    E = 0.5 * math.sqrt(disc)
    u_m, v_m, du_m, dv_m = table.pair(np.array([tm]))
    u_s = float(seed_value(model, p, tm, u_m, du_m)[0])
    v_s = float(seed_value(model, p, tm, v_m, dv_m)[0])
    J_s = 0.5 * (u_s * u_s * A_vv - 2.0 * u_s * v_s * A_uv + v_s * v_s * A_uu)
    return p ** 3 * J_s / (4.0 * math.pi ** 2 * E)


def power_spectrum(model: PreInflationModel, f: WindowFunction, p: float, route: str = "auto",
                   n_panels: Optional[int] = None) -> float:
    """SLE power spectrum at the seed time.

    route: 'fiducial' (matched Hankel/Bunch-Davies energy pair), 'commutator'
    (fiducial-free), or 'auto' (commutator below p = H, where the matched
    fiducial's |alpha|, |beta| grow and c1, c2 cancel; fiducial above).
    """
    if route == "auto":
        route = "commutator" if p < CROSSOVER * model.H else "fiducial"
    if route == "fiducial":
        P = power_spectrum_fiducial(model, f, p, n_panels)
    elif route == "commutator":
        P = power_spectrum_commutator(model, f, p, n_panels)
    else:
        raise DomainError(f"unknown route {route!r}")
    if not (np.isfinite(P) and P > 0):
        raise ConsistencyError(f"non-positive power spectrum at p = {p}")
    return P


@dataclass(frozen=True)
class SpectrumTable:
    momenta: np.ndarray      # in units of H
    P: np.ndarray
    window: dict
    H: float

    def __post_init__(self):
        if not (np.all(np.isfinite(self.P)) and np.all(self.P > 0)):
            raise ConsistencyError("power spectrum must be positive and finite")

    @property
    def normalized(self) -> np.ndarray:
        """P (2 pi)^2 / H^2."""
        return self.P * (2.0 * math.pi) ** 2 / self.H ** 2

    def rows(self):
        return zip(self.momenta, self.P, self.normalized)


def p_grid(lo: float, hi: float, count: int, spacing: str = "log") -> np.ndarray:
    if count < 1 or not (0 < lo <= hi):
        raise DomainError("p-grid needs 0 < min <= max and count >= 1")
    if count == 1:
        return np.array([float(lo)])
    if spacing == "log":
        return np.geomspace(lo, hi, count)
    if spacing == "linear":
        return np.linspace(lo, hi, count)
    raise DomainError(f"unknown spacing {spacing!r}")


def spectrum_scan(model: PreInflationModel, f: WindowFunction, p_over_H: Sequence[float],
                  route: str = "auto") -> SpectrumTable:
    """P at each p = p_over_H * H (ascending)."""
    ps = np.asarray(p_over_H, dtype=float)
    if ps.ndim != 1 or ps.size == 0 or np.any(ps <= 0) or np.any(np.diff(ps) <= 0):
        raise DomainError("p-grid must be positive and strictly ascending")
    model.check_window(f)
    P = np.array([power_spectrum(model, f, x * model.H, route) for x in ps])
    desc = {"eta1": f.support[0], "eta2": f.support[1], **{k: v for k, v in f.params.items()}}
    desc["kinetic_only"] = bool(f.support[1] <= 0.0)
    return SpectrumTable(ps, P, desc, model.H)


# ---------------------------------------------------------------------------
# small-p extension


def seed_fiducial_data(model: PreInflationModel, tau_i: float):
    """(z0, w0) at tau_i of S_0 = (tau - tau_* + i)/sqrt(2), the p = 0
    solution with S_0(tau_*) = i/sqrt(2) and vanishing eta-derivative there."""
    r = 1.0 / math.sqrt(2.0)
    return complex(r * (tau_i - model.tau_star), r), complex(r, 0.0)


@dataclass(frozen=True)
class ExtensionRecord:
    p: np.ndarray
    series_ratio: np.ndarray     # P/p^2 from the small-p series fiducial
    direct_ratio: np.ndarray     # P/p^2 from the commutator route
    abar: float

    @property
    def max_relative_gap(self) -> float:
        return float(np.max(np.abs(self.series_ratio / self.direct_ratio - 1.0)))


def smallp_extension_check(model: PreInflationModel, f: WindowFunction, p_values,
                           order: int = 4) -> ExtensionRecord:
    """Compare P/p^2 from the series fiducial (started from S_0 above) with
    the direct commutator-route value."""
    from .smallp import series_fiducial

    bg = model.background
    lo, hi = f.tau_support(bg)
    tm = _continuation_time(model, hi)
    data = seed_fiducial_data(model, lo)
    sol = series_fiducial(bg, order, data=data, interval=(lo, tm))
    ps = np.asarray(p_values, dtype=float)
    series, direct = [], []
    for p in ps:
        def fid(tau, p=p):
            return sol.partial_sum(p, tau)

        pair = sle_parameters(model, f, p, fiducial=fid)
        co = minimize_bogoliubov(pair)
        S_m, dS_m = sol.partial_sum(p, np.array([tm]))
        s_star = complex(seed_value(model, p, tm, S_m, dS_m)[0])
        T_star = co.lam * s_star + co.mu * np.conj(s_star)
        series.append(p * abs(T_star) ** 2 / (2.0 * math.pi ** 2))
        direct.append(power_spectrum_commutator(model, f, p) / p ** 2)
    return ExtensionRecord(ps, np.array(series), np.array(direct), abar(bg, f))
