"""Shared numerical kernels.

ODE integration with dense output, adaptive and composite quadrature,
Bessel/Hankel functions of order 0 and 1, and the smooth step / bump
primitives used to build window functions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import expit

from .exceptions import AccuracyError, DomainError, StiffnessError

EULER_GAMMA = 0.57721566490153286061
MIN_GRID_POINTS = 16


# ---------------------------------------------------------------------------
# grids and trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing sample points covering a closed interval."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < MIN_GRID_POINTS:
            raise DomainError(f"grid needs at least {MIN_GRID_POINTS} points")
        if not np.all(np.isfinite(pts)):
            raise DomainError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int = 512) -> "Grid":
        if not hi > lo:
            raise DomainError("grid interval must satisfy lo < hi")
        pts = np.linspace(lo, hi, int(n))
        pts[0], pts[-1] = lo, hi
        return cls(pts)

    @property
    def lo(self) -> float:
        return float(self.points[0])

    @property
    def hi(self) -> float:
        return float(self.points[-1])

    def __len__(self):
        return self.points.size


@dataclass(frozen=True, eq=False)
class ComplexTrajectory:
    """Complex values and first derivatives sampled on a grid.

    ``dense`` (optional) maps an array of times to ``(value, derivative)``
    anywhere inside the integration interval.
    """

    grid: Grid
    value: np.ndarray
    derivative: np.ndarray
    dense: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.grid)
        if np.shape(self.value) != (n,) or np.shape(self.derivative) != (n,):
            raise DomainError("value/derivative length must match the grid")

    def __call__(self, t):
        if self.dense is None:
            raise DomainError("trajectory has no dense output")
        return self.dense(t)


class _StackedDop853:
    """Vectorized evaluation of a scipy DOP853 ``OdeSolution``.

    scipy evaluates one interpolant per Python call; stacking the
    interpolant coefficients lets whole arrays be evaluated at once.
    """

    def __init__(self, sol):
        inter = sol.interpolants if sol.ascending else sol.interpolants[::-1]
        self.ts = np.asarray(sol.ts_sorted)
        self.t_old = np.array([q.t_old for q in inter])
        self.h = np.array([q.h for q in inter])
        self.F = np.stack([np.asarray(q.F) for q in inter])        # (m, 7, n)
        self.y_old = np.stack([np.asarray(q.y_old) for q in inter])  # (m, n)

    def __call__(self, t):
        j = np.clip(np.searchsorted(self.ts, t, side="left") - 1, 0, self.h.size - 1)
        x = ((t - self.t_old[j]) / self.h[j])[:, None]
        F = self.F[j]
        y = np.zeros_like(self.y_old[j])
        for i in range(F.shape[1] - 1, -1, -1):
            y += F[:, i]
            y *= x if (F.shape[1] - 1 - i) % 2 == 0 else 1.0 - x
        y += self.y_old[j]
        return y.T


class DenseLinearSolution:
    """Piecewise dense output of a linear second-order system.

    Holds one dense interpolant per integration segment. Evaluating
    returns ``(y, dy)`` with shape ``(k, n)`` for ``k`` simultaneous
    solutions.
    """

    def __init__(self, segments, k: int, is_complex: bool):
        self._segments = sorted(segments, key=lambda s: s[0])
        self._k = k
        self._complex = is_complex
        self.lo = self._segments[0][0]
        self.hi = self._segments[-1][1]
        self._edges = np.array([s[0] for s in self._segments[1:]])

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < self.lo - 1e-12 * max(1.0, abs(self.lo))) or np.any(
            t > self.hi + 1e-12 * max(1.0, abs(self.hi))
        ):
            raise DomainError("evaluation time outside the integration interval")
        tc = np.clip(t, self.lo, self.hi)
        idx = np.searchsorted(self._edges, tc, side="right")
        width = 4 * self._k if self._complex else 2 * self._k
        out = np.empty((width, tc.size))
        for j in np.unique(idx):
            mask = idx == j
            out[:, mask] = self._segments[j][2](tc[mask])
        k = self._k
        if self._complex:
            y = out[:k] + 1j * out[k:2 * k]
            dy = out[2 * k:3 * k] + 1j * out[3 * k:]
        else:
            y, dy = out[:k], out[k:]
        return y, dy


def _finite_check(fn, lo, hi, name):
    probe = np.linspace(lo, hi, 33)
    vals = np.array([fn(t) for t in probe], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DomainError(f"non-finite {name} coefficient on [{lo}, {hi}]")


def solve_linear(
    omega_sq: Callable[[float], float],
    y0,
    dy0,
    t0: float,
    lo: float,
    hi: float,
    tol: float = 1e-12,
    damping: Optional[Callable[[float], float]] = None,
    breakpoints: Sequence[float] = (),
    max_step: float = np.inf,
) -> DenseLinearSolution:
    """Integrate y'' + c(t) y' + omega_sq(t) y = 0 for several initial data.

    Integration starts at ``t0`` and runs forward to ``hi`` and backward to
    ``lo``, restarting at every breakpoint (where the coefficients may be
    non-smooth). ``y0``/``dy0`` are arrays of equal length ``k``.
    """
    if not 1e-14 < tol < 1e-3:
        raise DomainError("tol must lie in (1e-14, 1e-3)")
    if not lo <= t0 <= hi:
        raise DomainError("initial time outside the integration interval")
    y0 = np.atleast_1d(np.asarray(y0))
    dy0 = np.atleast_1d(np.asarray(dy0))
    is_complex = np.iscomplexobj(y0) or np.iscomplexobj(dy0)
    k = y0.size
    _finite_check(omega_sq, lo, hi, "frequency")
    if damping is not None:
        _finite_check(damping, lo, hi, "damping")

    if is_complex:
        y0 = y0.astype(complex)
        dy0 = dy0.astype(complex)
        state0 = np.concatenate([y0.real, y0.imag, dy0.real, dy0.imag])
        half = 2 * k
    else:
        state0 = np.concatenate([y0.astype(float), dy0.astype(float)])
        half = k

    def rhs(t, s):
        y, dy = s[:half], s[half:]
        acc = -omega_sq(t) * y
        if damping is not None:
            acc = acc - damping(t) * dy
        return np.concatenate([dy, acc])

    scale = max(float(np.max(np.abs(state0))), 1e-300)
    atol = tol * 1e-3 * scale
    cuts = sorted(b for b in breakpoints if lo < b < hi)

    segments = []
    for direction, end in ((1, hi), (-1, lo)):
        if end == t0:
            continue
        stops = [b for b in cuts if (b - t0) * direction > 0]
        stops = sorted(stops, key=lambda b: (b - t0) * direction) + [end]
        t_start, state = t0, state0
        for stop in stops:
            sol = integrate.solve_ivp(
                rhs, (t_start, stop), state, method="DOP853", rtol=tol,
                atol=atol, dense_output=True, max_step=max_step,
            )
            if sol.status != 0:
                raise StiffnessError(f"integration failed: {sol.message}")
            a, b = sorted((t_start, stop))
            segments.append((a, b, _StackedDop853(sol.sol)))
            t_start, state = stop, sol.y[:, -1]
    if not segments:
        raise DomainError("empty integration interval")
    return DenseLinearSolution(segments, k, is_complex)


def integrate_ode(
    omega_sq: Callable[[float], float],
    initial: tuple,
    grid: Grid,
    tol: float = 1e-12,
    t0: Optional[float] = None,
    damping: Optional[Callable[[float], float]] = None,
    breakpoints: Sequence[float] = (),
) -> ComplexTrajectory:
    """Solve T'' + damping*T' + omega_sq*T = 0 with data ``initial`` at ``t0``.

    ``t0`` defaults to the first grid point. The result carries values on the
    grid and a dense evaluator for the whole grid interval.
    """
    t0 = grid.lo if t0 is None else float(t0)
    z, w = initial
    dense = solve_linear(
        omega_sq, np.array([complex(z)]), np.array([complex(w)]), t0,
        min(grid.lo, t0), max(grid.hi, t0), tol=tol, damping=damping,
        breakpoints=breakpoints,
    )

    def evaluate(t):
        y, dy = dense(t)
        return y[0], dy[0]

    y, dy = evaluate(grid.points)
    return ComplexTrajectory(grid, y, dy, evaluate)


def ode_residual(traj: ComplexTrajectory, omega_sq: Callable, order: int = 6):
    """Pointwise relative residual |T'' + w^2 T| / (|w^2 T| + |T''|).

    T'' is obtained by finite differencing the sampled derivative, so the
    residual measures the consistency of value and derivative samples.
    """
    t = traj.grid.points
    d2 = _fd_derivative(t, traj.derivative, order)
    w2 = np.array([omega_sq(x) for x in t])
    num = np.abs(d2 + w2 * traj.value)
    den = np.abs(w2 * traj.value) + np.abs(d2)
    return num / np.maximum(den, 1e-300)


def _fd_derivative(t, y, order=6):
    """Finite-difference derivative on a (not necessarily uniform) grid."""
    n = t.size
    m = order + 1
    out = np.empty_like(y)
    for i in range(n):
        j0 = min(max(i - m // 2, 0), n - m)
        idx = np.arange(j0, j0 + m)
        x = t[idx] - t[i]
        # weights of the derivative at 0 from the Vandermonde system
        V = np.vander(x, m, increasing=True).T
        rhs = np.zeros(m)
        rhs[1] = 1.0
        wts = np.linalg.solve(V, rhs)
        out[i] = wts @ y[idx]
    return out


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def quad(f: Callable, lo: float, hi: float, tol: float = 1e-10, limit: int = 200):
    """Adaptive Gauss-Kronrod integral of ``f`` over [lo, hi].

    Complex integrands are detected from a probe evaluation. Raises
    ``AccuracyError`` (with the best estimate attached) when the requested
    tolerance is not reached.
    """
    if not hi > lo:
        raise DomainError("quad requires lo < hi")
    probe = f(0.5 * (lo + hi))
    is_complex = np.iscomplexobj(probe)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        val, err = integrate.quad(
            f, lo, hi, epsabs=1e-15, epsrel=tol, limit=limit,
            complex_func=is_complex,
        )
    if is_complex:
        err = abs(err)
    ok = err <= tol * abs(val) + 1e-15
    if caught and not ok:
        raise AccuracyError(
            f"quadrature did not converge (error estimate {err:.3g})", val, err
        )
    return val


def gauss_panels(breaks: Sequence[float], order: int = 20):
    """Composite Gauss-Legendre nodes and weights on consecutive panels."""
    breaks = np.asarray(breaks, dtype=float)
    if breaks.ndim != 1 or breaks.size < 2 or np.any(np.diff(breaks) <= 0):
        raise DomainError("panel breaks must be strictly increasing")
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(breaks)
    mid = 0.5 * (breaks[1:] + breaks[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def panel_breaks(lo: float, hi: float, n_panels: int, cuts: Sequence[float] = ()):
    """Split [lo, hi] into about ``n_panels`` panels with edges at ``cuts``."""
    edges = [lo] + sorted(c for c in cuts if lo < c < hi) + [hi]
    length = hi - lo
    out = [lo]
    for a, b in zip(edges[:-1], edges[1:]):
        m = max(1, int(math.ceil(n_panels * (b - a) / length)))
        out.extend(np.linspace(a, b, m + 1)[1:])
    return np.array(out)


# ---------------------------------------------------------------------------
# Bessel and Hankel functions of order 0 and 1
# ---------------------------------------------------------------------------

SERIES_SWITCH = 13.0
_SERIES_TERMS = 60
_ASYM_TERMS = 40


def _series_jy(order: int, x: np.ndarray):
    q = 0.25 * x * x
    lg = np.log(0.5 * x) + EULER_GAMMA
    if order == 0:
        term = np.ones_like(x)
        j = term.copy()
        s = np.zeros_like(x)
        harmonic = 0.0
        for k in range(1, _SERIES_TERMS):
            term = -term * q / (k * k)
            harmonic += 1.0 / k
            j += term
            s -= harmonic * term
        y = (2.0 / math.pi) * (lg * j + s)
        return j, y
    # order one: terms (x/2)^{2k+1} (-1)^k / (k!(k+1)!)
    term = 0.5 * x
    j = term.copy()
    h1, h2 = 0.0, 1.0
    s = (h1 + h2) * term
    for k in range(1, _SERIES_TERMS):
        term = -term * q / (k * (k + 1))
        h1 += 1.0 / k
        h2 += 1.0 / (k + 1)
        j += term
        s += (h1 + h2) * term
    # psi(k+1) + psi(k+2) = H_k + H_{k+1} - 2 gamma
    y = (2.0 / math.pi) * (lg * j) - 2.0 / (math.pi * x) - s / math.pi
    return j, y


def _asymptotic_jy(order: int, x: np.ndarray):
    mu = 4.0 * order * order
    chi = x - (0.5 * order + 0.25) * math.pi
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    term = np.ones_like(x)
    done = np.zeros(x.shape, dtype=bool)
    prev = np.full_like(x, np.inf)
    for k in range(1, _ASYM_TERMS):
        new = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        # stop each point once terms start growing (optimal truncation)
        grow = np.abs(new) >= prev
        done |= grow
        term = np.where(done, 0.0, new)
        prev = np.where(done, prev, np.abs(new))
        if k % 2 == 1:
            Q += term * (-1) ** ((k - 1) // 2)
        else:
            P += term * (-1) ** (k // 2)
        if np.all(done):
            break
    amp = np.sqrt(2.0 / (math.pi * x))
    c, s = np.cos(chi), np.sin(chi)
    return amp * (P * c - Q * s), amp * (P * s + Q * c)


def bessel_jy(order: int, x):
    """Bessel functions (J_order(x), Y_order(x)) for order 0 or 1, x > 0.

    Power series below x = 13, Hankel asymptotic expansion (optimally
    truncated) above.
    """
    if order not in (0, 1):
        raise DomainError("only orders 0 and 1 are supported")
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if np.any(~np.isfinite(xa)) or np.any(xa <= 0):
        raise DomainError("bessel_jy requires finite x > 0")
    J = np.empty_like(xa)
    Y = np.empty_like(xa)
    small = xa < SERIES_SWITCH
    if np.any(small):
        J[small], Y[small] = _series_jy(order, xa[small])
    if np.any(~small):
        J[~small], Y[~small] = _asymptotic_jy(order, xa[~small])
    if scalar:
        return float(J[0]), float(Y[0])
    return J, Y


def hankel(kind: int, order: int, x):
    """Hankel function H^(kind)_order(x) = J +/- iY."""
    if kind not in (1, 2):
        raise DomainError("Hankel kind must be 1 or 2")
    J, Y = bessel_jy(order, x)
    sign = 1.0 if kind == 1 else -1.0
    return J + sign * 1j * np.asarray(Y)


# ---------------------------------------------------------------------------
# smooth step and bump
# ---------------------------------------------------------------------------

def smooth_step(y):
    """C-infinity step: 0 for y <= 0, 1 for y >= 1, e^{-1/y} blend between."""
    y = np.asarray(y, dtype=float)
    inner = (y > 0) & (y < 1)
    yi = np.where(inner, y, 0.5)
    with np.errstate(divide="ignore", over="ignore"):
        val = expit(1.0 / (1.0 - yi) - 1.0 / yi)
    out = np.where(y >= 1, 1.0, np.where(inner, val, 0.0))
    return float(out) if out.ndim == 0 else out


def bump(y, w: float):
    """Plateau of half-width ``w`` with smooth walls, vanishing for |y| >= w+1."""
    if not w > 0:
        raise DomainError("bump width parameter must be positive")
    y = np.asarray(y, dtype=float)
    arg = (y * y - w * w) / ((w + 1.0) ** 2 - w * w)
    out = 1.0 - np.asarray(smooth_step(arg))
    return float(out) if out.ndim == 0 else out
