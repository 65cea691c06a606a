"""Convergent small-momentum expansions.

The series fiducial S_p = sum_n S_n p^{2n} is built from the retarded
iteration S_n(tau) = -int_{tau_i}^{tau} Delta_0(tau, s) w2(s)^2 S_{n-1}(s) ds,
which gives S_n(tau_i) = dS_n(tau_i) = 0 for n >= 1. Cumulative integrals
are spectral (piecewise Chebyshev), one pass per order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .background import Background, WindowFunction, abar, default_panels, window_rule
from .chebyshev import PiecewiseChebyshev
from .exceptions import ConsistencyError, ContractError, DomainError
from .modes import ModeSolution, mode_from_function, working_grid
from .numerics import Grid, solve_linear

ORDER_CAP = 6
DEFAULT_DATA = (1.0 + 0.0j, -0.5j)


@dataclass(frozen=True, eq=False)
class ZeroOrder:
    """p = 0 fundamental pair (u0, v0) normalized at tau_i, with derivatives."""

    evaluate: Callable
    tau_i: float
    massless: bool


def _zero_order(bg: Background, lo: float, hi: float, tol: float = 1e-13) -> ZeroOrder:
    if bg.massless:
        def evaluate(t):
            t = np.asarray(t, dtype=float)
            one = np.ones_like(t)
            return one, t - lo, 0.0 * one, one
        return ZeroOrder(evaluate, lo, True)
    w0 = bg.scalar_fn("v")
    dense = solve_linear(w0, np.array([1.0, 0.0]), np.array([0.0, 1.0]), lo, lo, hi,
                         tol=tol, breakpoints=bg.breakpoints)

    def evaluate(t):
        y, dy = dense(t)
        return y[0], y[1], dy[0], dy[1]

    return ZeroOrder(evaluate, lo, False)


@dataclass(eq=False)
class SeriesSolution:
    """Coefficients S_0..S_N of the series fiducial on [tau_i, tau_f]."""

    background: Background
    order: int
    data: tuple
    interval: tuple
    zero: ZeroOrder = field(repr=False)
    integrals: list = field(repr=False)   # (I_u, I_v) per order n >= 1
    p_star: float = float("nan")
    kernel_bound: float = float("nan")

    def coefficient(self, n: int, tau):
        """(S_n, dS_n) at tau."""
        u, v, du, dv = self.zero.evaluate(tau)
        if n == 0:
            z0, w0 = self.data
            return z0 * u + w0 * v, z0 * du + w0 * dv
        Iu, Iv = self.integrals[n - 1]
        iu, iv = Iu(tau), Iv(tau)
        return -v * iu + u * iv, -dv * iu + du * iv

    def coefficients(self, tau, order: Optional[int] = None):
        """Arrays S[n], dS[n] for n = 0..order."""
        order = self.order if order is None else order
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        S = np.empty((order + 1, tau.size), dtype=complex)
        dS = np.empty_like(S)
        for n in range(order + 1):
            S[n], dS[n] = self.coefficient(n, tau)
        return S, dS

    def partial_sum(self, p: float, tau, order: Optional[int] = None):
        S, dS = self.coefficients(tau, order)
        x = (p * p) ** np.arange(S.shape[0])
        return x @ S, x @ dS

    def as_mode(self, p: float, grid: Optional[Grid] = None, order: Optional[int] = None) -> ModeSolution:
        grid = grid or Grid.uniform(self.interval[0], self.interval[1], 512)
        return mode_from_function(p, grid, lambda t: self.partial_sum(p, t, order),
                                  self.background)


def _integration_edges(bg: Background, lo: float, hi: float):
    return np.array([lo] + [b for b in bg.breakpoints if lo < b < hi] + [hi])


def series_fiducial(bg: Background, N: int, data: tuple = DEFAULT_DATA,
                    interval: Optional[tuple] = None, f: Optional[WindowFunction] = None,
                    cap: int = ORDER_CAP, bound_samples: int = 160) -> SeriesSolution:
    """Series fiducial with data (z0, w0) at tau_i and zero data for n >= 1."""
    if not 0 <= N <= cap:
        raise DomainError(f"series order must lie in [0, {cap}]")
    z0, w0 = complex(data[0]), complex(data[1])
    if abs(w0 * np.conj(z0) - np.conj(w0) * z0 + 1j) > 1e-10:
        raise ContractError("series data violate w0 z0* - w0* z0 = -i")
    if interval is None:
        if f is None:
            raise DomainError("need an interval or a window")
        interval = f.tau_support(bg)
    lo, hi = map(float, interval)
    zero = _zero_order(bg, lo, hi)
    edges = _integration_edges(bg, lo, hi)
    sol = SeriesSolution(bg, N, (z0, w0), (lo, hi), zero, [])
    for n in range(1, N + 1):
        def g(t, n=n):
            s, _ = sol.coefficient(n - 1, t)
            u, v, _, _ = zero.evaluate(t)
            w2 = bg.jet("w", t)
            return np.stack([u * w2 * s, v * w2 * s], axis=-1)

        both = PiecewiseChebyshev.interpolate(g, edges).cumulative()
        Iu = _component(both, 0)
        Iv = _component(both, 1)
        sol.integrals.append((Iu, Iv))
    sol.kernel_bound, sol.p_star = contraction_radius(sol, bound_samples)
    return sol


def _component(pc: PiecewiseChebyshev, k: int) -> PiecewiseChebyshev:
    return PiecewiseChebyshev(pc.edges, [c[:, k] for c in pc.coeffs])


def contraction_radius(sol: SeriesSolution, samples: int = 160):
    """(R, p_star) with R the sup of the integral-equation kernel entries
    (Feynman kernel built from S_0, weighted by w2^2) and
    p_star^2 = 1/((tau_f - tau_i) R)."""
    lo, hi = sol.interval
    t = np.linspace(lo, hi, samples)
    s0, ds0 = sol.coefficient(0, t)
    w2 = sol.background.jet("w", t)
    later = t[:, None] >= t[None, :]
    K = np.where(later, 1j * s0[:, None] * np.conj(s0)[None, :],
                 1j * np.conj(s0)[:, None] * s0[None, :])
    dK = np.where(later, 1j * ds0[:, None] * np.conj(s0)[None, :],
                  1j * np.conj(ds0)[:, None] * s0[None, :])
    R = float(max(np.max(np.abs(K) * w2[None, :]), np.max(np.abs(dK) * w2[None, :])))
    return R, 1.0 / math.sqrt((hi - lo) * R)


def second_derivative(sol: SeriesSolution, n: int, tau):
    """S_n'' from the representation S_n = -v0 I_u + u0 I_v, using
    u0'' = -w0^2 u0 and the interpolated integrands I_u', I_v'."""
    bg = sol.background
    u, v, du, dv = sol.zero.evaluate(tau)
    w0 = bg.jet("v", tau) if not bg.massless else 0.0 * np.asarray(tau, dtype=float)
    if n == 0:
        z0, w0d = sol.data
        return -w0 * (z0 * u + w0d * v)
    Iu, Iv = sol.integrals[n - 1]
    gu, gv = Iu.derivative(), Iv.derivative()
    return -w0 * (-v * Iu(tau) + u * Iv(tau)) - dv * gu(tau) + du * gv(tau)


def order_residuals(sol: SeriesSolution, samples: int = 64):
    """max |S_n'' + w0^2 S_n + w2^2 S_{n-1}| for n = 0..N."""
    bg = sol.background
    lo, hi = sol.interval
    t = np.linspace(lo, hi, samples)
    S, _ = sol.coefficients(t)
    w0 = bg.jet("v", t) if not bg.massless else 0.0 * t
    w2 = bg.jet("w", t)
    out = []
    for n in range(sol.order + 1):
        r = second_derivative(sol, n, t) + w0 * S[n]
        if n:
            r = r + w2 * S[n - 1]
        out.append(float(np.max(np.abs(r))))
    return out


def partial_sum_residual(sol: SeriesSolution, p: float, order: Optional[int] = None,
                         samples: int = 64) -> float:
    """max over tau of |(d^2 + w_p^2) sum_{n<=N} p^{2n} S_n|.

    The operator is applied order by order, so the value is
    sum_n p^{2n} r_n + p^{2N+2} w2^2 S_N with r_n the per-order residuals,
    free of cancellation between orders.
    """
    order = sol.order if order is None else order
    bg = sol.background
    lo, hi = sol.interval
    t = np.linspace(lo, hi, samples)
    S, _ = sol.coefficients(t, order)
    w0 = bg.jet("v", t) if not bg.massless else 0.0 * t
    w2 = bg.jet("w", t)
    total = np.zeros(t.size, dtype=complex)
    x = p * p
    for n in range(order + 1):
        r = second_derivative(sol, n, t) + w0 * S[n]
        if n:
            r = r + w2 * S[n - 1]
        total += x ** n * r
    total += x ** (order + 1) * w2 * S[order]
    return float(np.max(np.abs(total)))


# ---------------------------------------------------------------------------
# commutator series
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class CommutatorSeries:
    """Delta_n(tau, tau') from the series fiducial's Cauchy products."""

    series: SeriesSolution
    order: int

    def _terms(self, tau, taup, d1=False, d2=False):
        S, dS = self.series.coefficients(tau, self.order)
        Sp, dSp = self.series.coefficients(taup, self.order)
        A = dS if d1 else S
        B = dSp if d2 else Sp
        return A, B

    def blocks(self, tau, taup):
        """Delta_n, d_tau, d_taup, mixed on the outer grid, shape (N+1, n, m)."""
        S, dS = self.series.coefficients(tau, self.order)
        Sp, dSp = self.series.coefficients(taup, self.order)
        out = []
        for A, B in ((S, Sp), (dS, Sp), (S, dSp), (dS, dSp)):
            D = np.empty((self.order + 1, A.shape[1], B.shape[1]))
            for n in range(self.order + 1):
                acc = np.zeros((A.shape[1], B.shape[1]), dtype=complex)
                for j in range(n + 1):
                    acc += np.outer(A[j], np.conj(B[n - j]))
                D[n] = -2.0 * acc.imag
            out.append(D)
        return tuple(out)

    def coefficient(self, n, tau, taup):
        """Delta_n at matching pairs (tau[k], taup[k])."""
        S, _ = self.series.coefficients(tau, self.order)
        Sp, _ = self.series.coefficients(taup, self.order)
        acc = sum(S[j] * np.conj(Sp[n - j]) for j in range(n + 1))
        return -2.0 * np.imag(acc)

    def evaluate(self, p, tau, taup):
        x = (p * p) ** np.arange(self.order + 1)
        return sum(x[n] * self.coefficient(n, tau, taup) for n in range(self.order + 1))


def commutator_series(bg: Background, N: int, data: tuple = DEFAULT_DATA,
                      interval: Optional[tuple] = None, f: Optional[WindowFunction] = None,
                      series: Optional[SeriesSolution] = None) -> CommutatorSeries:
    if series is None:
        series = series_fiducial(bg, N, data, interval, f)
    if N > series.order:
        raise DomainError("commutator order exceeds the series order")
    return CommutatorSeries(series, N)


def deltaexp_residuals(cs: CommutatorSeries, taup: float, samples: int = 48):
    """Residuals of the Delta_n recursion in the first argument and of the
    diagonal derivative condition, per order n >= 1."""
    bg = cs.series.background
    lo, hi = cs.series.interval
    edges = _integration_edges(bg, lo, hi)
    out = []
    t = np.linspace(lo, hi, samples + 2)[1:-1]
    for n in range(1, cs.order + 1):
        def d1(x, n=n):
            _, D1, _, _ = cs.blocks(np.atleast_1d(x), np.array([taup]))
            return D1[n, :, 0]
        dd = PiecewiseChebyshev.interpolate(d1, edges, deg=64, check=False).derivative()
        D, D1, _, _ = cs.blocks(t, np.array([taup]))
        v = bg.jet("v", t) if not bg.massless else 0.0 * t
        w = bg.jet("w", t)
        rec = dd(t) + v * D[n, :, 0] + w * D[n - 1, :, 0]
        Ddiag = cs.blocks(np.array([taup]), np.array([taup]))[1][n, 0, 0]
        out.append((float(np.max(np.abs(rec))), abs(float(Ddiag))))
    return out


# ---------------------------------------------------------------------------
# SLE series
# ---------------------------------------------------------------------------

def _cauchy(A, B, n):
    return sum(A[j] * B[n - j] for j in range(n + 1))


def _series_sqrt(a):
    b = np.zeros(len(a))
    b[0] = math.sqrt(a[0])
    for n in range(1, len(a)):
        b[n] = (a[n] - sum(b[k] * b[n - k] for k in range(1, n))) / (2.0 * b[0])
    return b


def _series_div(a, b):
    """Coefficients of a/b (a may carry trailing axes)."""
    a = np.asarray(a, dtype=float)
    c = np.zeros_like(a)
    for n in range(len(a)):
        c[n] = (a[n] - sum(b[k] * c[n - k] for k in range(1, n + 1))) / b[0]
    return c


@dataclass(eq=False)
class SleSeries:
    """Coefficient tables of the small-p SLE expansion.

    massive:  E = sum e_n p^{2n},      |T|^2 = sum t_n(tau) p^{2n}
    massless: E = p sum e_n p^{2n},    |T|^2 = p^{-1} sum t_n(tau) p^{2n}
    """

    regime: str
    order: int
    tau: np.ndarray
    J: np.ndarray          # (N+1, len(tau))
    K: np.ndarray
    Jdot: np.ndarray
    eps_sq: np.ndarray     # (N+1,)
    energy_coeffs: np.ndarray
    modulus_coeffs: np.ndarray
    window_mass: float
    commutator: CommutatorSeries = field(repr=False)

    def energy(self, p: float, order: Optional[int] = None) -> float:
        order = self.order - (1 if self.regime == "massless" else 0) if order is None else order
        x = (p * p) ** np.arange(order + 1)
        val = float(x @ self.energy_coeffs[: order + 1])
        return val * p if self.regime == "massless" else val

    def modulus_sq(self, p: float, order: Optional[int] = None):
        order = self.order - (1 if self.regime == "massless" else 0) if order is None else order
        x = (p * p) ** np.arange(order + 1)
        val = x @ self.modulus_coeffs[: order + 1]
        return val / p if self.regime == "massless" else val


def _jk_series(cs: CommutatorSeries, bg, nodes, weights, tau0):
    """J_n, K_n, Jdot_n at tau0 (arrays (N+1, len(tau0)))."""
    N = cs.order
    D, D1, D2, D12 = cs.blocks(nodes, tau0)
    w0 = bg.jet("v", nodes) if not bg.massless else np.zeros_like(nodes)
    w2 = bg.jet("w", nodes)
    wt = weights[:, None]
    J = np.zeros((N + 1, tau0.size))
    K = np.zeros_like(J)
    Jd = np.zeros_like(J)
    for n in range(N + 1):
        jn = _cauchy(D1, D1, n) + w0[:, None] * _cauchy(D, D, n)
        kn = _cauchy(D12, D12, n) + w0[:, None] * _cauchy(D2, D2, n)
        dn = _cauchy(D1, D12, n) + w0[:, None] * _cauchy(D, D2, n)
        if n >= 1:
            jn = jn + w2[:, None] * _cauchy(D, D, n - 1)
            kn = kn + w2[:, None] * _cauchy(D2, D2, n - 1)
            dn = dn + w2[:, None] * _cauchy(D, D2, n - 1)
        J[n] = 0.5 * np.sum(wt * jn, axis=0)
        K[n] = 0.5 * np.sum(wt * kn, axis=0)
        Jd[n] = np.sum(wt * dn, axis=0)
    return J, K, Jd


def sle_series(bg: Background, f: WindowFunction, N: int, tau=None,
               data: tuple = DEFAULT_DATA, n_panels: int = 24,
               series: Optional[SeriesSolution] = None) -> SleSeries:
    """Coefficients J_n, K_n, eps_n^2 and the assembled E, |T|^2 expansions."""
    lo, hi = f.tau_support(bg)
    if series is None:
        series = series_fiducial(bg, N, data, (lo, hi))
    cs = commutator_series(bg, N, series=series)
    nodes, weights = window_rule(bg, f, n_panels)
    tau = working_grid(bg, f, n=65).points if tau is None else np.atleast_1d(np.asarray(tau, float))
    Jq, Kq, _ = _jk_series(cs, bg, nodes, weights, nodes)
    J, K, Jd = _jk_series(cs, bg, nodes, weights, tau)
    w0 = bg.jet("v", nodes) if not bg.massless else np.zeros_like(nodes)
    w2 = bg.jet("w", nodes)
    eps = np.zeros(N + 1)
    for n in range(N + 1):
        integrand = Kq[n] + w0 * Jq[n]
        if n >= 1:
            integrand = integrand + w2 * Jq[n - 1]
        eps[n] = 0.25 * float(np.sum(weights * integrand))
    mass = float(np.sum(weights))
    scale = max(abs(eps[1]) if N >= 1 else 0.0, abs(eps[0]), 1e-300)
    k0 = float(np.max(np.abs(K[0])))
    k_scale = float(np.max(np.abs(K[1]))) if N >= 1 else 1.0
    if bg.massless:
        if abs(eps[0]) > 1e-10 * scale or k0 > 1e-10 * max(k_scale, 1e-300):
            raise ConsistencyError("massless background but eps0/K0 do not vanish")
        if N < 1 or not eps[1] > 0:
            raise ConsistencyError("massless regime needs eps1 > 0 (order >= 1)")
        regime = "massless"
        e = _series_sqrt(eps[1:])
        t = _series_div(J[: N].astype(float), 2.0 * e)
    else:
        if not eps[0] > 0 or np.any(K[0] <= 0):
            raise ConsistencyError("ambiguous regime: eps0 ~ 0 but K0 does not vanish")
        regime = "massive"
        e = _series_sqrt(eps)
        t = _series_div(J.astype(float), 2.0 * e)
    return SleSeries(regime, N, tau, J, K, Jd, eps, e, t, mass, cs)


# ---------------------------------------------------------------------------
# IR records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IRRecord:
    p_values: np.ndarray
    scaled_modulus: np.ndarray   # 2 p |T(tau_c)|^2
    extrapolated: float
    abar: float
    relative_error: float
    correction_order: float
    imag_two_point_error: float
    energy_ratio: float          # E / (p int f^2 / (2 abar)) at the smallest p


def ir_limit(bg: Background, f: WindowFunction, p_values: Sequence[float]) -> IRRecord:
    """Massless IR: 2p|T|^2 -> abar, Im W -> -(tau - tau')/2, E -> p int f^2/(2 abar)."""
    from .sle_core import sle_state

    if not bg.massless:
        raise DomainError("ir_limit needs a massless background")
    p_values = np.asarray(p_values, dtype=float)
    if np.any(np.diff(p_values) >= 0):
        raise DomainError("p_values must be decreasing")
    ab = abar(bg, f)
    lo, hi = f.tau_support(bg)
    tc = 0.5 * (lo + hi)
    vals = []
    res = None
    for p in p_values:
        res = sle_state(bg, f, p, "commutator")
        vals.append(2.0 * p * float(res.modulus_sq(np.array([tc]))[0]))
    vals = np.array(vals)
    p1, p2 = p_values[-2], p_values[-1]
    y1, y2 = vals[-2], vals[-1]
    extrap = (p1 * p1 * y2 - p2 * p2 * y1) / (p1 * p1 - p2 * p2)
    dev = np.abs(vals - extrap)
    with np.errstate(divide="ignore", invalid="ignore"):
        order = float(np.log(dev[-2] / dev[-1]) / np.log(p1 / p2)) if dev[-1] > 0 else float("inf")
    t = np.linspace(lo, hi, 7)
    tt, ss = np.meshgrid(t, t)
    W = res.mode(tt.ravel())[0] * np.conj(res.mode(ss.ravel())[0])
    im_err = float(np.max(np.abs(W.imag + 0.5 * (tt.ravel() - ss.ravel()))))
    nodes, weights = window_rule(bg, f, 24)
    mass = float(np.sum(weights))
    e_ratio = res.energy / (p_values[-1] * mass / (2.0 * ab))
    return IRRecord(p_values, vals, float(extrap), ab, abs(vals[-1] / ab - 1.0), order,
                    im_err, float(e_ratio))


@dataclass(frozen=True)
class CrosscheckRecord:
    p: float
    mu: float
    lam: complex
    mu_scaled: float          # mu sqrt(p)
    mu_scaled_target: float   # |w0| sqrt(abar/2)
    two_point_deviation: float


def fiducial_free_crosscheck(bg: Background, f: WindowFunction, p: float, N: int = 4,
                             data: tuple = DEFAULT_DATA) -> CrosscheckRecord:
    """Fiducial route with the regular series fiducial vs the commutator route."""
    from .sle_core import sle_from_fiducial, sle_state

    lo, hi = f.tau_support(bg)
    series = series_fiducial(bg, N, data, (lo, hi))
    S = series.as_mode(p)
    fid = sle_from_fiducial(S, f, bg, default_panels(bg, f, p))
    com = sle_state(bg, f, p, "commutator", grid=S.grid)
    t = np.linspace(lo, hi, 9)
    tt, ss = [a.ravel() for a in np.meshgrid(t, t)]
    W1 = fid.mode(tt)[0] * np.conj(fid.mode(ss)[0])
    W2 = com.mode(tt)[0] * np.conj(com.mode(ss)[0])
    dev = float(np.max(np.abs(W1 - W2)) / np.max(np.abs(W2)))
    ab = abar(bg, f)
    mu = float(abs(fid.coeffs.mu))
    return CrosscheckRecord(p, mu, fid.coeffs.lam, mu * math.sqrt(p),
                            abs(complex(data[1])) * math.sqrt(ab / 2.0), dev)
