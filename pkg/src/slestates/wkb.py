"""Large-momentum machinery: WKB-type coefficients s_n, generalized heat
kernel coefficients G_n and the asymptotic forms built from them.

The G_n are differential polynomials in v = w0^2 and w = w2^2. They are
generated symbolically on jet space (symbols v_k, w_k for the k-th
derivatives, with the total derivative D v_k = v_{k+1}) and evaluated
from the background's analytic jets.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import sympy as sp

from .background import Background
from .chebyshev import PiecewiseChebyshev
from .exceptions import CapabilityError, DomainError
from .modes import ModeSolution
from .numerics import _fd_derivative

WKB_CAP = 8
GD_CAP = 4


# ---------------------------------------------------------------------------
# jet space


def _jet_symbols(K: int):
    v = sp.symbols(f"v0:{K + 1}", real=True)
    w = sp.symbols(f"w0:{K + 1}", positive=True)
    return v, w


def _D(expr, K: int):
    """Total tau-derivative on jet space truncated at order K."""
    v, w = _jet_symbols(K + 1)
    out = 0
    for k in range(K + 1):
        out += sp.diff(expr, v[k]) * v[k + 1] + sp.diff(expr, w[k]) * w[k + 1]
    return out


def _order_of(expr) -> int:
    """Highest jet order appearing in expr."""
    k = 0
    for s in expr.free_symbols:
        k = max(k, int(s.name[1:]))
    return k


@functools.lru_cache(maxsize=None)
def gd_expressions(N: int):
    """G_0..G_N on jet space from the nonlinear Gelfand-Dickey recursion."""
    K = 2 * N + 2
    v, w = _jet_symbols(K)
    om = sp.sqrt(w[0])
    G = [sp.Integer(1)]
    for n in range(1, N + 1):
        acc = 0
        for k in range(n):
            l = n - 1 - k
            hk = G[k] / om
            hl = G[l] / om
            dhk, dhl = _D(hk, K), _D(hl, K)
            acc += (sp.Rational(1, 4) * hk * _D(dhl, K) - sp.Rational(1, 8) * dhk * dhl
                    + sp.Rational(1, 2) * v[0] / w[0] * G[k] * G[l])
        for k in range(1, n):
            acc -= sp.Rational(1, 2) * G[k] * G[n - k]
        G.append(sp.expand(acc))
    return tuple(G)


def closed_forms():
    """Published closed forms of G_1 and G_2 on jet space."""
    v, w = _jet_symbols(4)
    V, V1, V2 = v[0], v[1], v[2]
    W, W1, W2, W3, W4 = w
    R = sp.Rational
    g1 = V / (2 * W) + R(5, 32) * W1 ** 2 / W ** 3 - R(1, 8) * W2 / W ** 2
    g2 = (R(3, 8) / W ** 2 * (V ** 2 + V2 / 3)
          - R(5, 16) / W ** 3 * (V * W2 + V1 * W1 - V * R(7, 4) * W1 ** 2 / W)
          + R(1, 32) / W ** 3 * (-W4 + R(21, 4) * W2 ** 2 / W + 7 * W3 * W1 / W
                                 - R(231, 8) * W1 ** 2 * W2 / W ** 2
                                 + R(1155, 64) * W1 ** 4 / W ** 3))
    return g1, g2


def conformal_g2(g1):
    """G_2 = 3/2 G_1^2 + (1/(4 w2)) d(dG_1 / w2), from the conformal-time map."""
    K = 6
    w = _jet_symbols(K)[1]
    om = sp.sqrt(w[0])
    return sp.Rational(3, 2) * g1 ** 2 + _D(_D(g1, K) / om, K) / (4 * om)


class _JetEvaluator:
    """Evaluate jet-space expressions from a background's analytic jets."""

    def __init__(self, bg: Background, K: int):
        if K > bg.max_derivative:
            raise CapabilityError(
                f"needs derivatives to order {K}; background supplies {bg.max_derivative}")
        self.bg = bg
        self.K = K
        self.symbols = _jet_symbols(K)

    def compile(self, expr):
        v, w = self.symbols
        if self.bg.massless:
            expr = expr.subs({s: 0 for s in v})
        k = _order_of(expr) if expr.free_symbols else 0
        if k > self.K:
            raise CapabilityError(f"expression needs jet order {k} > {self.K}")
        return sp.lambdify(list(v) + list(w), expr, "numpy")

    def args(self, tau):
        tau = np.asarray(tau, dtype=float)
        vs = [self.bg.jet("v", tau, k) if not self.bg.massless else np.zeros_like(tau)
              for k in range(self.K + 1)]
        ws = [self.bg.jet("w", tau, k) for k in range(self.K + 1)]
        return vs + ws

    def __call__(self, fn, tau):
        tau = np.asarray(tau, dtype=float)
        out = fn(*self.args(tau))
        return np.broadcast_to(np.asarray(out, dtype=float), tau.shape).copy()


# ---------------------------------------------------------------------------
# heat kernel coefficients


@dataclass(eq=False)
class HeatKernelCoeffs:
    """G_0 = 1, G_1..G_N evaluated from background jets."""

    background: Background
    order: int
    expressions: tuple = field(repr=False)
    _eval: _JetEvaluator = field(repr=False)
    _fns: list = field(repr=False)

    def __call__(self, n: int, tau):
        if not 0 <= n <= self.order:
            raise DomainError(f"coefficient index must lie in [0, {self.order}]")
        return self._eval(self._fns[n], tau)

    def values(self, tau):
        """Array of shape (N + 1, len(tau))."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        return np.array([self(n, tau) for n in range(self.order + 1)])

    def closed_form(self, n: int, tau):
        """G_1 or G_2 from the published differential polynomials."""
        if n not in (1, 2):
            raise DomainError("closed forms are available for n = 1, 2")
        ev = _JetEvaluator(self.background, 2 * n)
        return ev(ev.compile(closed_forms()[n - 1]), tau)

    def conformal_g2(self, tau):
        ev = _JetEvaluator(self.background, 4)
        return ev(ev.compile(conformal_g2(self.expressions[1])), tau)

    def recursion_residual(self, tau):
        """Relative size of the coefficients of z^{-2m}, m = 1..N, in the
        nonlinear Gelfand-Dickey equation for the truncated series
        G_z = sum g_n z^{-2n-1}, g_n = G_n / (2 w2)."""
        N = self.order
        K = 2 * N + 2
        ev = _JetEvaluator(self.background, min(K, self.background.max_derivative))
        v, w = _jet_symbols(K)
        g = [G / (2 * sp.sqrt(w[0])) for G in self.expressions]
        dg = [_D(x, K) for x in g]
        d2g = [_D(x, K) for x in dg]
        worst = np.zeros(np.atleast_1d(tau).shape)
        # natural scale of the order-m coefficient: lambda^m with
        # lambda = max_k |G_k|^(1/k) (the z^0 coefficient is 1)
        G = self.values(tau)
        lam = np.max([np.abs(G[k]) ** (1.0 / k) for k in range(1, N + 1)], axis=0) if N else 0.0
        for m in range(1, N + 1):
            terms = []
            for k in range(m):
                l = m - 1 - k
                terms += [2 * g[k] * d2g[l], -dg[k] * dg[l], 4 * v[0] * g[k] * g[l]]
            for k in range(m + 1):
                terms.append(-4 * w[0] * g[k] * g[m - k])
            vals = [ev(ev.compile(t), tau) for t in terms]
            num = np.abs(np.sum(vals, axis=0))
            den = np.sum(np.abs(vals), axis=0) + (1.0 + lam) ** m
            worst = np.maximum(worst, num / np.maximum(den, 1e-300))
        return worst

    def modulus_jet(self, p: float, tau, order: Optional[int] = None):
        """Truncated asymptote m = (1/(2 p w2)) sum (-)^n G_n p^{-2n} with
        its first two tau-derivatives."""
        N = self.order if order is None else order
        K = 2 * N + 2
        ev = _JetEvaluator(self.background, K)
        w = _jet_symbols(K)[1]
        x = sp.Symbol("x", positive=True)
        m = sum((-1) ** n * self.expressions[n] * x ** n for n in range(N + 1)) / (2 * sp.sqrt(w[0]))
        dm = _D(m, K)
        d2m = _D(dm, K)
        out = []
        for e in (m, dm, d2m):
            fn = ev.compile(e.subs(x, 1.0 / (p * p)))
            out.append(ev(fn, tau) / p)
        return tuple(out)


def gd_coeffs(bg: Background, N: int) -> HeatKernelCoeffs:
    """G_n, n <= N, from the Gelfand-Dickey recursion."""
    if not 0 <= N <= GD_CAP:
        raise DomainError(f"order must lie in [0, {GD_CAP}]")
    if 2 * N > bg.max_derivative:
        raise CapabilityError(
            f"G_{N} needs derivatives to order {2 * N}; background supplies {bg.max_derivative}")
    exprs = gd_expressions(N)
    ev = _JetEvaluator(bg, 2 * N)
    fns = [ev.compile(e) for e in exprs]
    return HeatKernelCoeffs(bg, N, exprs, ev, fns)


def wkb_modulus_asymptote(coeffs: HeatKernelCoeffs, p: float, tau, order: Optional[int] = None):
    """(1/(2 p w2)) {1 + sum_{n<=N} (-)^n G_n p^{-2n}}."""
    if p <= 0:
        raise DomainError("momentum must be positive")
    N = coeffs.order if order is None else order
    tau = np.asarray(tau, dtype=float)
    w2 = np.sqrt(coeffs.background.jet("w", tau))
    total = np.ones_like(w2)
    for n in range(1, N + 1):
        total = total + (-1) ** n * coeffs(n, tau) / p ** (2 * n)
    return total / (2.0 * p * w2)


def _reciprocal_series(G, N):
    """Coefficients r_n of 1 / (1 + sum_{n>=1} (-)^n G_n x^n) through x^N."""
    a = [np.ones_like(G[0])] + [(-1) ** n * G[n] for n in range(1, N + 1)]
    r = [np.ones_like(G[0])]
    for n in range(1, N + 1):
        r.append(-sum(a[k] * r[n - k] for k in range(1, n + 1)))
    return r


def wkb_phase_asymptote(coeffs: HeatKernelCoeffs, p: float, tau, tau0: float,
                        order: Optional[int] = None, deg: int = 64):
    """arg T(tau) - arg T(tau0) = -(p) int_{tau0}^{tau} w2 {1 + G_1/p^2
    + (G_1^2 - G_2)/p^4 + ...} with the reciprocal series truncated at N."""
    if p <= 0:
        raise DomainError("momentum must be positive")
    N = coeffs.order if order is None else order
    bg = coeffs.background
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    lo, hi = min(tau0, tau.min()), max(tau0, tau.max())
    if hi == lo:
        return np.zeros(tau.shape)
    edges = np.array([lo] + [b for b in bg.breakpoints if lo < b < hi] + [hi])

    def integrand(t):
        G = coeffs.values(t)
        r = _reciprocal_series(G, N)
        s = sum(r[n] / p ** (2 * n) for n in range(N + 1))
        return np.sqrt(bg.jet("w", t)) * s

    I = PiecewiseChebyshev.interpolate(integrand, edges, deg=deg).cumulative()
    return -p * (I(tau) - I(np.array([tau0]))[0])


# ---------------------------------------------------------------------------
# s_n recursion


@dataclass(eq=False)
class WkbCoeffs:
    """s_1..s_N (with derivatives) on [tau_i, tau_f]; s_0 = 1."""

    background: Background
    order: int
    interval: tuple
    s: list = field(repr=False)        # PiecewiseChebyshev per n >= 1
    ds: list = field(repr=False)
    initial: np.ndarray = field(default=None)
    phase: PiecewiseChebyshev = field(default=None, repr=False)  # int_{tau_i} w2

    def value(self, n: int, tau):
        tau = np.asarray(tau, dtype=float)
        if n == 0:
            return np.ones(tau.shape)
        return np.asarray(self.s[n - 1](tau)).reshape(tau.shape)

    def derivative(self, n: int, tau):
        tau = np.asarray(tau, dtype=float)
        if n == 0:
            return np.zeros(tau.shape)
        return np.asarray(self.ds[n - 1](tau)).reshape(tau.shape)

    def wronskian_conditions(self):
        """Residuals of the conditions fixing the even-order constants."""
        t = np.array([self.interval[0]])
        w2 = np.sqrt(self.background.jet("w", t))[0]
        S = [self.value(n, t)[0] for n in range(self.order + 1)]
        dS = [self.derivative(n, t)[0] for n in range(self.order + 1)]
        out = []
        for M in range(1, self.order // 2 + 1):
            r = sum(S[2 * n] * S[2 * (M - n)] for n in range(M + 1))
            for m in range(M):
                n = 2 * M - 1 - 2 * m
                r -= dS[n] * S[2 * m] / w2
            out.append(abs(r))
        return out

    def V(self, n: int, tau, taup):
        """V_n(tau, tau') = sum_j (-)^{n-j} s_j(tau) s_{n-j}(tau')."""
        return sum((-1) ** (n - j) * self.value(j, tau) * self.value(n - j, taup)
                   for j in range(n + 1))

    def mode(self, p: float, tau, order: Optional[int] = None):
        """Truncated WKB-type solution and its derivative."""
        N = self.order if order is None else order
        tau = np.asarray(tau, dtype=float)
        w = self.background.jet("w", tau)
        dw = self.background.jet("w", tau, 1)
        w2 = np.sqrt(w)
        ph = np.exp(-1j * p * self.phase(tau).reshape(tau.shape))
        amp = 1.0 / np.sqrt(2.0 * p * w2)
        S = sum((1j * p) ** (-n) * self.value(n, tau) for n in range(N + 1))
        dS = sum((1j * p) ** (-n) * self.derivative(n, tau) for n in range(1, N + 1))
        val = amp * ph * S
        der = amp * ph * (dS + (-1j * p * w2 - 0.25 * dw / w) * S)
        return val, der


def _smooth_interval(bg: Background, lo: float, hi: float):
    if any(lo < b < hi for b in bg.breakpoints):
        raise DomainError("the WKB recursion needs an interval inside one smooth piece")


def wkb_s_coeffs(bg: Background, N: int, interval: tuple, deg: int = 64) -> WkbCoeffs:
    """s_n by cumulative quadrature of the recursion; s_n(tau_i) = 0 for odd n,
    even-n constants fixed by Wronskian normalization."""
    if not 1 <= N <= WKB_CAP:
        raise DomainError(f"order must lie in [1, {WKB_CAP}]")
    if N + 2 > bg.max_derivative:
        raise CapabilityError(
            f"order {N} needs derivatives to order {N + 2}; background supplies {bg.max_derivative}")
    lo, hi = map(float, interval)
    if not (bg.contains(lo, strict=False) and bg.contains(hi, strict=False)) or hi <= lo:
        raise DomainError("interval outside the background's working interval")
    _smooth_interval(bg, lo, hi)
    edges = np.array([lo, hi])

    def ds1_fn(t):
        w = bg.jet("w", t)
        om = np.sqrt(w)
        dom = 0.5 * bg.jet("w", t, 1) / om
        d2om = (0.5 * bg.jet("w", t, 2) - dom ** 2) / om
        v = bg.jet("v", t) if not bg.massless else 0.0 * t
        return v / (2 * om) - (d2om / om - 1.5 * (dom / om) ** 2) / (4 * om)

    def om_fn(t):
        return np.sqrt(bg.jet("w", t))

    interp = functools.partial(PiecewiseChebyshev.interpolate, edges=edges, deg=deg)
    om = interp(om_fn)
    ds1 = interp(ds1_fn)
    s = [ds1.cumulative()]
    ds = [ds1]
    tau_i = np.array([lo])
    w2_i = float(om(tau_i)[0])
    initial = np.zeros(N + 1)
    initial[0] = 1.0
    for n in range(2, N + 1):
        q = _product(ds[-1], lambda t: 1.0 / (2.0 * om_fn(t)), edges, deg)
        prod = _product(s[-1], ds1, edges, deg)
        dn = _sum(prod, q.derivative())
        sn = _shift(_sum(prod.cumulative(), q), -float(q(tau_i)[0]))
        if n % 2 == 0:
            M = n // 2
            Sv = [1.0] + [float(x(tau_i)[0]) for x in s]
            dSv = [0.0] + [float(x(tau_i)[0]) for x in ds] + [float(dn(tau_i)[0])]
            Sv.append(0.0)
            r = sum(Sv[2 * k] * Sv[2 * (M - k)] for k in range(1, M))
            for m in range(M):
                k = 2 * M - 1 - 2 * m
                r -= dSv[k] * Sv[2 * m] / w2_i
            c = -0.5 * r
            sn = _shift(sn, c)
            initial[n] = c
        s.append(sn)
        ds.append(dn)
    return WkbCoeffs(bg, N, (lo, hi), s, ds, initial, om.cumulative())


def _product(a: PiecewiseChebyshev, b, edges, deg):
    return PiecewiseChebyshev.interpolate(lambda t: a(t) * b(t), edges, deg=deg)


def _sum(a: PiecewiseChebyshev, b: PiecewiseChebyshev) -> PiecewiseChebyshev:
    out = []
    for ca, cb in zip(a.coeffs, b.coeffs):
        n = max(ca.size, cb.size)
        out.append(np.pad(ca, (0, n - ca.size)) + np.pad(cb, (0, n - cb.size)))
    return PiecewiseChebyshev(a.edges, out)


def _shift(a: PiecewiseChebyshev, c: float) -> PiecewiseChebyshev:
    out = [x.copy() for x in a.coeffs]
    for x in out:
        x[0] += c
    return PiecewiseChebyshev(a.edges, out)


@dataclass(frozen=True, eq=False)
class TwoPointWkb:
    coeffs: WkbCoeffs
    order: int

    def V(self, n: int, tau, taup):
        return self.coeffs.V(n, tau, taup)

    def __call__(self, p: float, tau, taup):
        c = self.coeffs
        tau = np.asarray(tau, dtype=float)
        taup = np.asarray(taup, dtype=float)
        w = np.sqrt(c.background.jet("w", tau) * c.background.jet("w", taup))
        ph = c.phase(np.atleast_1d(tau)).reshape(tau.shape) - c.phase(np.atleast_1d(taup)).reshape(taup.shape)
        total = sum(self.V(n, tau, taup) * (1j * p) ** (-n) for n in range(self.order + 1))
        return np.exp(-1j * p * ph) / (2.0 * p * w) * total


def two_point_wkb(coeffs: WkbCoeffs, p: float, tau, taup, order: Optional[int] = None):
    """Truncated large-p form of S_p(tau) S_p(tau')^*."""
    if p <= 0:
        raise DomainError("momentum must be positive")
    return TwoPointWkb(coeffs, coeffs.order if order is None else order)(p, tau, taup)


# ---------------------------------------------------------------------------
# Gelfand-Dickey residual


def gelfand_dickey_residual(bg: Background, trajectory, p: float):
    """Scaled residual of 2 m m'' - m'^2 + 4 w_p^2 m^2 - 1 for m = |S|^2.

    ``trajectory`` is a ModeSolution (derivatives from S, S' and
    S'' = -w_p^2 S), a tuple (tau, m, dm, d2m), or samples (tau, m) on
    which derivatives are taken by sixth-order differencing.
    """
    if isinstance(trajectory, ModeSolution):
        tau = trajectory.grid.points
        S, dS = trajectory.value, trajectory.derivative
        w = bg.omega_sq(p, tau)
        m = np.abs(S) ** 2
        dm = 2.0 * np.real(dS * np.conj(S))
        d2m = 2.0 * np.abs(dS) ** 2 - 2.0 * w * m
    elif len(trajectory) == 4:
        tau, m, dm, d2m = (np.asarray(x, dtype=float) for x in trajectory)
        w = bg.omega_sq(p, tau)
    else:
        tau, m = (np.asarray(x, dtype=float) for x in trajectory)
        dm = _fd_derivative(tau, m)
        d2m = _fd_derivative(tau, dm)
        w = bg.omega_sq(p, tau)
    terms = np.array([2.0 * m * d2m, -dm ** 2, 4.0 * w * m ** 2])
    num = np.abs(terms.sum(axis=0) - 1.0)
    den = np.abs(terms).sum(axis=0) + 1.0
    return float(np.max(num / den))
