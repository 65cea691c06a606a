"""Friedmann-Lemaitre background data, frequencies and window functions.

Everything downstream works in the invariant time tau (d tau = nbar dt).
Built-in backgrounds carry closed-form a(tau) and m(tau)^2 as sympy
expressions on smooth pieces, so tau-derivatives of any order are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import sympy as sp
from scipy.integrate import trapezoid
from scipy.interpolate import make_interp_spline

from .exceptions import CapabilityError, DomainError
from .numerics import bump, quad

GAUGES = ("cosmological", "conformal", "proper")
TAU = sp.Symbol("tau", real=True)
JET_NAMES = ("a", "m2", "v", "w")


def gauge_power(gauge: str, d: int) -> int:
    """k such that dt/dtau = a^k, i.e. nbar = a^{-k}, and f^gauge^2 = f^2 a^k."""
    if gauge == "cosmological":
        return d
    if gauge == "conformal":
        return d - 1
    if gauge == "proper":
        return 0
    raise DomainError(f"unknown gauge {gauge!r}; expected one of {GAUGES}")


@dataclass(frozen=True, eq=False)
class Piece:
    """Smooth segment [lo, hi] of tau with closed-form a(tau), m(tau)^2."""

    lo: float
    hi: float
    a: sp.Expr
    m2: sp.Expr


class _JetCache:
    """Lazily lambdified tau-derivatives of the background functions."""

    def __init__(self, pieces, d):
        self._pieces = pieces
        self._d = d
        self._exprs = {}
        self._vec = {}
        self._scalar = {}

    def expr(self, i, name, k):
        key = (i, name, k)
        if key not in self._exprs:
            if k == 0:
                pc = self._pieces[i]
                d = self._d
                base = {
                    "a": pc.a,
                    "m2": pc.m2,
                    "v": pc.a ** (2 * d) * pc.m2,
                    "w": pc.a ** (2 * d - 2),
                }[name]
                self._exprs[key] = base
            else:
                self._exprs[key] = sp.diff(self.expr(i, name, k - 1), TAU)
        return self._exprs[key]

    def vec(self, i, name, k):
        key = (i, name, k)
        if key not in self._vec:
            self._vec[key] = sp.lambdify(TAU, self.expr(i, name, k), "numpy")
        return self._vec[key]

    def scalar(self, i, name, k):
        key = (i, name, k)
        if key not in self._scalar:
            self._scalar[key] = sp.lambdify(TAU, self.expr(i, name, k), "math")
        return self._scalar[key]


class Background:
    """Scale factor and mass on a working interval, expressed in tau.

    Parameters
    ----------
    pieces : sequence of Piece
        Contiguous smooth segments in tau. At a shared edge the later piece
        is used.
    d : int
        Spatial dimension.
    gauge : str
        Native gauge of the coordinate time t used for windows and output.
    t_of_tau, tau_of_t : callables
        Vectorized maps between tau and the native gauge time.
    interval : (float, float)
        Working interval in tau (open ends may be infinite).
    """

    def __init__(
        self,
        pieces: Sequence[Piece],
        d: int = 3,
        gauge: str = "proper",
        t_of_tau: Optional[Callable] = None,
        tau_of_t: Optional[Callable] = None,
        interval: Optional[tuple] = None,
        name: str = "custom",
        params: Optional[dict] = None,
        max_derivative: int = 8,
        scale: float = 1.0,
        t_ref: float = 0.0,
    ):
        if int(d) != d or d < 1:
            raise DomainError("spatial dimension must be a positive integer")
        gauge_power(gauge, d)
        self.pieces = tuple(pieces)
        for left, right in zip(self.pieces[:-1], self.pieces[1:]):
            if left.hi != right.lo:
                raise DomainError("background pieces must be contiguous")
        self.d = int(d)
        self.gauge = gauge
        self.name = name
        self.params = dict(params or {})
        self.max_derivative = int(max_derivative)
        if self.max_derivative < 2:
            raise CapabilityError("backgrounds must supply at least two derivatives")
        self.scale = float(scale)
        self.t_ref = float(t_ref)
        lo = self.pieces[0].lo if interval is None else interval[0]
        hi = self.pieces[-1].hi if interval is None else interval[1]
        self.interval = (float(lo), float(hi))
        self._t_of_tau = t_of_tau or (lambda x: np.asarray(x, dtype=float) + self.t_ref)
        self._tau_of_t = tau_of_t or (lambda t: np.asarray(t, dtype=float) - self.t_ref)
        self._jets = _JetCache(self.pieces, self.d)
        self._edges = np.array([pc.lo for pc in self.pieces[1:]])
        self.massless = all(sp.simplify(pc.m2) == 0 for pc in self.pieces)

    # -- basic geometry ---------------------------------------------------
    def __repr__(self):
        return f"Background({self.name}, d={self.d}, gauge={self.gauge}, params={self.params})"

    @property
    def breakpoints(self) -> tuple:
        """Interior tau values where the background is only finitely smooth."""
        return tuple(pc.lo for pc in self.pieces[1:])

    def contains(self, tau, strict=True) -> bool:
        lo, hi = self.interval
        tau = np.asarray(tau, dtype=float)
        if strict:
            return bool(np.all((tau > lo) & (tau < hi)))
        return bool(np.all((tau >= lo) & (tau <= hi)))

    def _piece_index(self, tau):
        return np.searchsorted(self._edges, tau, side="right")

    def t_of_tau(self, tau):
        return self._t_of_tau(tau)

    def tau_of_t(self, t):
        return self._tau_of_t(t)

    # -- jets ---------------------------------------------------------------
    def jet(self, name: str, tau, k: int = 0):
        """k-th tau-derivative of a, m2, v = a^{2d} m^2 or w = a^{2d-2}."""
        if name not in JET_NAMES:
            raise DomainError(f"unknown background function {name!r}")
        if k > self.max_derivative:
            raise CapabilityError(
                f"derivative order {k} exceeds the supported order {self.max_derivative}"
            )
        tau = np.asarray(tau, dtype=float)
        flat = np.atleast_1d(tau)
        idx = self._piece_index(flat)
        out = np.empty(flat.shape)
        for i in np.unique(idx):
            mask = idx == i
            val = self._jets.vec(int(i), name, k)(flat[mask])
            out[mask] = np.broadcast_to(np.asarray(val, dtype=float), flat[mask].shape)
        return out.reshape(tau.shape) if tau.ndim else float(out[0])

    def jet_expr(self, name: str, k: int = 0, piece: int = 0) -> sp.Expr:
        return self._jets.expr(piece, name, k)

    def scalar_fn(self, name: str, k: int = 0) -> Callable[[float], float]:
        """Fast scalar evaluator (used inside ODE right-hand sides)."""
        fns = [self._jets.scalar(i, name, k) for i in range(len(self.pieces))]
        edges = list(self._edges)
        if len(fns) == 1:
            f0 = fns[0]
            return lambda t: float(f0(t))

        def fn(t):
            i = 0
            while i < len(edges) and t >= edges[i]:
                i += 1
            return float(fns[i](t))

        return fn

    def a(self, tau):
        return self.jet("a", tau)

    def omega_sq_fn(self, p: float) -> Callable[[float], float]:
        """Scalar tau -> omega_p^2 = omega0^2 + p^2 omega2^2."""
        w = self.scalar_fn("w")
        if self.massless:
            p2 = p * p
            return lambda t: p2 * w(t)
        v = self.scalar_fn("v")
        p2 = p * p
        return lambda t: v(t) + p2 * w(t)

    def omega_sq(self, p: float, tau):
        out = p * p * self.jet("w", tau)
        if not self.massless:
            out = out + self.jet("v", tau)
        return out

    def to_gauge(self, gauge: str, t_ref: Optional[float] = None) -> "Background":
        """Same background with coordinate time in another gauge.

        The new time is t' = t_ref + int_0^tau a^k dtau', tabulated with
        Chebyshev interpolation on each piece and inverted by Newton steps.
        """
        gmap = _NumericGaugeMap(self, gauge_power(gauge, self.d), 0.0 if t_ref is None else t_ref)
        return Background(
            self.pieces, self.d, gauge, gmap.t_of_tau, gmap.tau_of_t, self.interval,
            self.name, self.params, self.max_derivative, self.scale, gmap.t_ref,
        )

    def t_interval(self):
        lo, hi = self.interval
        tl = float(self.t_of_tau(lo)) if np.isfinite(lo) else -np.inf
        th = float(self.t_of_tau(hi)) if np.isfinite(hi) else np.inf
        return tl, th


@dataclass(frozen=True)
class FrequencyPair:
    """omega0^2(tau) = a^{2d} m^2 and omega2^2(tau) = a^{2d-2}."""

    omega0_sq: Callable
    omega2_sq: Callable
    massless: bool

    def omega_sq(self, p, tau):
        return self.omega0_sq(tau) + p * p * self.omega2_sq(tau)


def frequencies(bg: Background) -> FrequencyPair:
    return FrequencyPair(
        lambda tau: bg.jet("v", tau), lambda tau: bg.jet("w", tau), bg.massless
    )


def tau_of_t(bg: Background, t):
    lo, hi = bg.t_interval()
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < lo) or np.any(t_arr > hi):
        raise DomainError("time outside the working interval")
    return bg.tau_of_t(t)


class _NumericGaugeMap:
    """t(tau) = t_ref + int_0^tau a^k for an arbitrary background."""

    def __init__(self, bg, k, t_ref, deg=96):
        self.t_ref = float(t_ref)
        self._bg = bg
        self._k = k
        self._polys = []
        lo, hi = bg.interval
        # finite tabulation range: the interval clipped to a reasonable span
        span_lo = lo if np.isfinite(lo) else (hi if np.isfinite(hi) else 0.0) - 50.0 * (1.0 / bg.scale)
        span_hi = hi if np.isfinite(hi) else (lo if np.isfinite(lo) else 0.0) + 50.0 * (1.0 / bg.scale)
        eps = 1e-9 * (span_hi - span_lo)
        cuts = [span_lo + eps] + [b for b in bg.breakpoints if span_lo < b < span_hi] + [span_hi - eps]
        offset = 0.0
        segs = []
        for a_, b_ in zip(cuts[:-1], cuts[1:]):
            f = np.polynomial.Chebyshev.interpolate(
                lambda x: bg.jet("a", x) ** k, deg, domain=[a_, b_]
            )
            segs.append((a_, b_, f.integ()))
        # anchor tau = 0 to t_ref
        for a_, b_, F in segs:
            if a_ <= 0.0 <= b_:
                zero_seg = (a_, b_, F)
                break
        else:
            raise DomainError("tau = 0 must lie in the working interval")
        # cumulative constants so the map is continuous
        consts = []
        acc = 0.0
        for a_, b_, F in segs:
            consts.append(acc - F(a_))
            acc = acc + F(b_) - F(a_)
        z_index = segs.index(zero_seg)
        offset = consts[z_index] + zero_seg[2](0.0)
        self._segs = [(a_, b_, F, c - offset) for (a_, b_, F), c in zip(segs, consts)]
        self._lo, self._hi = cuts[0], cuts[-1]

    def t_of_tau(self, tau):
        tau = np.asarray(tau, dtype=float)
        flat = np.atleast_1d(tau)
        out = np.empty(flat.shape)
        for a_, b_, F, c in self._segs:
            mask = (flat >= a_) & (flat <= b_)
            out[mask] = F(flat[mask]) + c
        bad = (flat < self._lo) | (flat > self._hi)
        if np.any(bad):
            raise DomainError("time outside the tabulated gauge map")
        out = out + self.t_ref
        return out.reshape(tau.shape) if tau.ndim else float(out[0])

    def tau_of_t(self, t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t)
        # bisection bracket then Newton polish
        lo = np.full(flat.shape, self._lo)
        hi = np.full(flat.shape, self._hi)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = self.t_of_tau(mid) < flat
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        x = 0.5 * (lo + hi)
        for _ in range(3):
            x = x - (self.t_of_tau(x) - flat) / self._bg.jet("a", x) ** self._k
        return x.reshape(t.shape) if t.ndim else float(x[0])


# ---------------------------------------------------------------------------
# built-in backgrounds
# ---------------------------------------------------------------------------

def minkowski(m0: float = 0.0, d: int = 3, interval=(-1.0e3, 1.0e3)) -> Background:
    """a = 1, constant mass m0; all gauges coincide with tau = t."""
    pc = Piece(interval[0], interval[1], sp.Integer(1), sp.Float(m0) ** 2 if m0 else sp.Integer(0))
    scale = abs(m0) if m0 else 1.0
    return Background([pc], d, "proper", interval=interval, name="minkowski",
                      params={"m0": m0}, scale=scale)


def power_law(nu: float, H: float = 1.0, d: int = 3, m0: float = 0.0) -> Background:
    """Power-law expansion with index nu, in conformal gauge.

    a(eta) = (1 + H eta / q)^q with q = (1 - 2 nu)/(d - 1), so that
    a(0) = 1 and a'(0) = H. In tau: a = (1 + 2 nu H tau / q)^{q/(2 nu)},
    reducing to exp(H tau) for nu = 0 and to a = 1 for nu = 1/2.
    """
    if H <= 0:
        raise DomainError("H must be positive")
    q = (1.0 - 2.0 * nu) / (d - 1)
    Hs = sp.Float(H)
    m2 = sp.Float(m0) ** 2 if m0 else sp.Integer(0)
    if abs(q) < 1e-14:
        return minkowski(m0, d)
    if nu == 0:
        a_expr = sp.exp(Hs * TAU)
        interval = (-np.inf, np.inf)

        def t_of_tau(x):
            return (q / H) * np.expm1(np.asarray(x, dtype=float) * H / q)

        def tau_of_t(t):
            with np.errstate(invalid="ignore", divide="ignore"):
                return (q / H) * np.log1p(np.asarray(t, dtype=float) * H / q)
    else:
        c = 2.0 * nu * H / q
        a_expr = (1 + sp.Float(c) * TAU) ** sp.Float(q / (2.0 * nu))
        interval = (-1.0 / c, np.inf) if c > 0 else (-np.inf, -1.0 / c)

        def t_of_tau(x):
            return (q / H) * ((1.0 + c * np.asarray(x, dtype=float)) ** (1.0 / (2.0 * nu)) - 1.0)

        def tau_of_t(t):
            return ((1.0 + H * np.asarray(t, dtype=float) / q) ** (2.0 * nu) - 1.0) / c
    pc = Piece(interval[0], interval[1], a_expr, m2)
    return Background([pc], d, "conformal", t_of_tau, tau_of_t, interval,
                      "power_law", {"nu": nu, "H": H, "m0": m0}, scale=H)


def desitter(H: float = 1.0, d: int = 3, m0: float = 0.0) -> Background:
    """de Sitter in conformal gauge, a = 1/(1 - H eta), eta < 1/H."""
    return _named(power_law(d / 2.0, H, d, m0), "desitter", {"H": H, "m0": m0})


def _named(bg, name, params):
    bg.name = name
    bg.params = dict(params)
    return bg


def preinflation(H: float = 1.0) -> Background:
    """Kinetic domination a = sqrt(1 + 2 H eta) for eta < 0 joined to
    de Sitter a = 1/(1 - H eta) for 0 <= eta < 1/H (d = 3, conformal gauge).

    In tau the pieces are a = exp(H tau) (tau < 0) and
    a = (1 - 3 H tau)^{-1/3} (0 <= tau < 1/(3H)).
    """
    if H <= 0:
        raise DomainError("H must be positive")
    Hs = sp.Float(H)
    tau_star = 1.0 / (3.0 * H)
    kin = Piece(-np.inf, 0.0, sp.exp(Hs * TAU), sp.Integer(0))
    ds = Piece(0.0, tau_star, (1 - 3 * Hs * TAU) ** sp.Rational(-1, 3), sp.Integer(0))

    def t_of_tau(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore"):
            neg = np.expm1(2.0 * H * np.minimum(x, 0.0)) / (2.0 * H)
            pos = (1.0 - np.cbrt(1.0 - 3.0 * H * np.maximum(x, 0.0))) / H
        return np.where(x < 0, neg, pos)

    def tau_of_t(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            neg = np.log1p(2.0 * H * np.minimum(t, 0.0)) / (2.0 * H)
            pos = (1.0 - (1.0 - H * np.maximum(t, 0.0)) ** 3) / (3.0 * H)
        return np.where(t < 0, neg, pos)

    return Background([kin, ds], 3, "conformal", t_of_tau, tau_of_t,
                      (-np.inf, tau_star), "preinflation", {"H": H}, scale=H)


def custom(a_expr, m_expr=0, symbol=None, gauge: str = "proper", d: int = 3,
           interval=(-np.inf, np.inf), t_ref: float = 0.0, name="custom") -> Background:
    """User background from sympy expressions a(t), m(t) in gauge time t.

    For non-proper gauges tau(t) = int_{t_ref}^t a^{-k} must be solvable in
    closed form by sympy (both the integral and its inverse).
    """
    t = symbol if symbol is not None else sp.Symbol("t", real=True)
    a_expr = sp.sympify(a_expr)
    m_expr = sp.sympify(m_expr)
    k = gauge_power(gauge, d)
    if k == 0:
        a_tau = a_expr.subs(t, TAU + t_ref)
        m_tau = m_expr.subs(t, TAU + t_ref)
        t_of_tau = sp.lambdify(TAU, TAU + t_ref, "numpy")
        tau_of_t = sp.lambdify(t, t - t_ref, "numpy")
        tau_iv = (interval[0] - t_ref, interval[1] - t_ref)
    else:
        s = sp.Symbol("s", real=True)
        tau_t = sp.integrate(a_expr.subs(t, s) ** (-k), (s, t_ref, t))
        if tau_t.has(sp.Integral):
            raise CapabilityError("tau(t) has no closed form; use proper gauge or tabulated()")
        try:
            sols = sp.solve(sp.Eq(tau_t, TAU), t)
        except NotImplementedError:
            sols = []
        if not sols:
            raise CapabilityError("t(tau) could not be inverted in closed form")
        t_tau = sols[0]
        a_tau = sp.simplify(a_expr.subs(t, t_tau))
        m_tau = m_expr.subs(t, t_tau)
        t_of_tau = sp.lambdify(TAU, t_tau, "numpy")
        tau_of_t = sp.lambdify(t, tau_t, "numpy")
        tau_iv = tuple(
            float(tau_t.subs(t, b)) if np.isfinite(b) else float(b) for b in interval
        )

    def vec(f):
        return lambda x: np.asarray(f(np.asarray(x, dtype=float)), dtype=float) + 0.0 * np.asarray(x, dtype=float)

    pc = Piece(tau_iv[0], tau_iv[1], a_tau, m_tau ** 2)
    return Background([pc], d, gauge, vec(t_of_tau), vec(tau_of_t), tau_iv, name,
                      {"a": str(a_expr), "m": str(m_expr)}, t_ref=t_ref)


class TabulatedBackground(Background):
    """Background from samples a(t_k); quintic spline in tau.

    Derivatives come from the spline, so the supported derivative order is
    capped at 4 and GD/WKB orders at 2.
    """

    def __init__(self, t, a, gauge="conformal", d=3, m0=0.0, t_ref=None):
        t = np.asarray(t, dtype=float)
        a = np.asarray(a, dtype=float)
        if t.ndim != 1 or t.size != a.size or t.size < 8:
            raise DomainError("need at least 8 matching samples of t and a")
        if np.any(np.diff(t) <= 0) or np.any(a <= 0):
            raise DomainError("samples must have increasing t and positive a")
        k = gauge_power(gauge, d)
        t_ref = float(t[0]) if t_ref is None else float(t_ref)
        nbar = make_interp_spline(t, a ** (-k), k=5)
        tau_anti = nbar.antiderivative()
        tau_k = tau_anti(t) - tau_anti(t_ref)
        self._a_spline = make_interp_spline(tau_k, a, k=5)
        self._t_spline = make_interp_spline(tau_k, t, k=5)
        self._tau_anti = tau_anti
        self._t_ref_val = t_ref
        self._m2 = m0 * m0
        self._derivs = {}
        self.pieces = (Piece(float(tau_k[0]), float(tau_k[-1]), sp.Symbol("a_tab"), sp.Float(m0 * m0)),)
        self.d = d
        self.gauge = gauge
        self.name = "tabulated"
        self.params = {"n_samples": int(t.size), "m0": m0}
        self.max_derivative = 4
        self.scale = 1.0
        self.t_ref = t_ref
        self.interval = (float(tau_k[0]), float(tau_k[-1]))
        self._edges = np.array([])
        self.massless = m0 == 0
        self._t_of_tau = lambda x: self._t_spline(np.asarray(x, dtype=float))
        self._tau_of_t = lambda s: tau_anti(np.asarray(s, dtype=float)) - tau_anti(t_ref)

    def _fn(self, name, k):
        key = (name, k)
        if key not in self._derivs:
            d = self.d
            if name == "a":
                spl = self._a_spline
            else:
                power = {"w": 2 * d - 2, "v": 2 * d, "m2": 0}[name]
                x = np.linspace(self.interval[0], self.interval[1], 4 * self._a_spline.c.size)
                vals = self._a_spline(x) ** power * (self._m2 if name in ("v", "m2") else 1.0)
                spl = make_interp_spline(x, vals, k=5)
            self._derivs[key] = spl.derivative(k) if k else spl
        return self._derivs[key]

    def jet(self, name, tau, k=0):
        if name not in JET_NAMES:
            raise DomainError(f"unknown background function {name!r}")
        if k > self.max_derivative:
            raise CapabilityError(
                f"derivative order {k} exceeds the supported order {self.max_derivative}"
            )
        tau = np.asarray(tau, dtype=float)
        out = np.asarray(self._fn(name, k)(tau), dtype=float)
        return out if tau.ndim else float(out)

    def jet_expr(self, name, k=0, piece=0):
        raise CapabilityError("tabulated backgrounds have no symbolic form")

    def scalar_fn(self, name, k=0):
        f = self._fn(name, k)
        return lambda t: float(f(t))


def tabulated(t, a, gauge="conformal", d=3, m0=0.0, t_ref=None) -> Background:
    return TabulatedBackground(t, a, gauge, d, m0, t_ref)


def gauge_integral(bg: Background, power: float, t_lo: float, t_hi: float, tol=1e-12):
    """int dt Nbar a^power over [t_lo, t_hi] in the background's own gauge.

    Nbar = nbar a^d, so the integrand is a^{power + d - k} in t; the value is
    gauge independent (it equals int dtau a^{d + power}).
    """
    k = gauge_power(bg.gauge, bg.d)
    a_t = lambda t: bg.a(bg.tau_of_t(t))
    return quad(lambda t: a_t(t) ** (power + bg.d - k), t_lo, t_hi, tol)


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WindowFunction:
    """Compactly supported window profile F(t) in a background's gauge time.

    ``convention`` says which gauge convention F follows: the tau-density is
    f^2(tau) = amplitude * F(t(tau)) * a(tau)^{-k} with k the gauge power of
    the convention (cosmological: d, conformal: d-1, proper: 0).
    """

    profile: Callable
    support: tuple
    convention: str = "proper"
    amplitude: float = 1.0
    name: str = "window"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.support
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise DomainError("window support must be a finite interval lo < hi")
        if self.convention not in GAUGES:
            raise DomainError(f"unknown window convention {self.convention!r}")
        if not self.amplitude > 0:
            raise DomainError("window amplitude must be positive")

    def scaled(self, s: float) -> "WindowFunction":
        """Window for f -> s f (f^2 picks up s^2)."""
        return WindowFunction(self.profile, self.support, self.convention,
                              self.amplitude * s * s, self.name, self.params)

    def tau_support(self, bg: Background) -> tuple:
        lo, hi = bg.tau_of_t(np.array(self.support, dtype=float))
        if not (bg.contains(lo) and bg.contains(hi)):
            raise DomainError(
                f"window support {self.support} not strictly inside the working interval "
                f"of {bg.name} (tau in {bg.interval})"
            )
        return float(lo), float(hi)

    def density(self, bg: Background, tau):
        """f^2 as a function of tau."""
        tau = np.asarray(tau, dtype=float)
        k = gauge_power(self.convention, bg.d)
        F = np.asarray(self.profile(bg.t_of_tau(tau)), dtype=float)
        if k:
            F = F * bg.jet("a", tau) ** (-k)
        return self.amplitude * F


def window_family(eta1: float, eta2: float, w: float, background: Optional[Background] = None,
                  convention: str = "cosmological") -> WindowFunction:
    """Smoothened top hat on [eta1, eta2] with plateau-to-wall ratio w."""
    if not eta1 < eta2:
        raise DomainError("window ends must satisfy eta1 < eta2")
    if not w > 0:
        raise DomainError("window plateau parameter w must be positive")
    center = 0.5 * (eta1 + eta2)
    half = (eta2 - eta1) / (2.0 * (w + 1.0))

    def profile(t):
        return bump((np.asarray(t, dtype=float) - center) / half, w)

    win = WindowFunction(profile, (float(eta1), float(eta2)), convention, 1.0,
                         "top_hat", {"eta1": eta1, "eta2": eta2, "w": w})
    if background is not None:
        win.tau_support(background)
    return win


def centered_window(bg: Background, tau0: float, width: float, w: float = 0.5) -> WindowFunction:
    """Top hat of total tau-width ``width`` centered at tau0 (proper convention in t)."""
    t_lo, t_hi = bg.t_of_tau(np.array([tau0 - width / 2, tau0 + width / 2]))
    center = tau0
    half = width / (2.0 * (w + 1.0))

    def profile(t):
        return bump((bg.tau_of_t(t) - center) / half, w)

    return WindowFunction(profile, (float(t_lo), float(t_hi)), "proper", 1.0,
                          "tau_top_hat", {"tau0": tau0, "width": width, "w": w})


def window_rule(bg: Background, f: WindowFunction, n_panels: int = 24, order: int = 20):
    """Composite Gauss-Legendre nodes in tau and weights including f^2."""
    from .numerics import gauss_panels, panel_breaks

    lo, hi = f.tau_support(bg)
    breaks = panel_breaks(lo, hi, n_panels, bg.breakpoints)
    nodes, weights = gauss_panels(breaks, order)
    return nodes, weights * f.density(bg, nodes)


def phase_count(bg: Background, f: WindowFunction, p: float) -> float:
    """Approximate number of oscillation half-periods of omega_p over the support."""
    lo, hi = f.tau_support(bg)
    x = np.linspace(lo, hi, 257)
    om = np.sqrt(np.maximum(bg.omega_sq(p, x), 0.0))
    return float(trapezoid(om, x) / math.pi)


def default_panels(bg: Background, f: WindowFunction, p: float) -> int:
    return 24 + int(math.ceil(phase_count(bg, f, p)))


def abar(bg: Background, f: WindowFunction, tol: float = 1e-12) -> float:
    """(int f^2 / int f^2 a^{2d-2})^{1/2}."""
    lo, hi = f.tau_support(bg)
    cuts = [lo] + [b for b in bg.breakpoints if lo < b < hi] + [hi]
    num = den = 0.0
    for x0, x1 in zip(cuts[:-1], cuts[1:]):
        num += quad(lambda x: float(f.density(bg, x)), x0, x1, tol)
        den += quad(lambda x: float(f.density(bg, x) * bg.jet("w", x)), x0, x1, tol)
    if not num > 0:
        raise DomainError("degenerate window: int f^2 vanishes")
    return math.sqrt(num / den)
