"""Mode solutions, the commutator function and single-solution identities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .background import Background, WindowFunction, default_panels, window_rule
from .exceptions import ContractError, DomainError, SingularityError
from .numerics import ComplexTrajectory, Grid, solve_linear

NORMALIZATION_TOL = 1e-10


def wronskian(value, derivative):
    """dT T* - T dT* (equals -i for a normalized mode)."""
    return derivative * np.conj(value) - value * np.conj(derivative)


@dataclass(frozen=True, eq=False)
class ModeSolution:
    """A complex mode T_p(tau) on a grid with a dense evaluator.

    Calling the object with an array of times returns ``(T, dT)``.
    """

    p: float
    trajectory: ComplexTrajectory
    wronskian_residual: float
    background: Optional[Background] = field(default=None, repr=False)

    def __call__(self, tau):
        return self.trajectory(tau)

    @property
    def grid(self) -> Grid:
        return self.trajectory.grid

    @property
    def value(self):
        return self.trajectory.value

    @property
    def derivative(self):
        return self.trajectory.derivative

    def rotated(self, a: complex, b: complex) -> "ModeSolution":
        """Bogoliubov transform a T + b T*."""
        def evaluate(t):
            y, dy = self(t)
            return a * y + b * np.conj(y), a * dy + b * np.conj(dy)

        return mode_from_function(self.p, self.grid, evaluate, self.background)


def mode_from_function(p: float, grid: Grid, evaluate: Callable,
                       background: Optional[Background] = None) -> ModeSolution:
    """Wrap an evaluator tau -> (T, dT) as a ModeSolution on ``grid``."""
    y, dy = evaluate(grid.points)
    y = np.asarray(y, dtype=complex)
    dy = np.asarray(dy, dtype=complex)
    traj = ComplexTrajectory(grid, y, dy, evaluate)
    res = float(np.max(np.abs(wronskian(y, dy) + 1j)))
    return ModeSolution(float(p), traj, res, background)


def working_grid(bg: Background, f: Optional[WindowFunction], n: int = 512,
                 extra=()) -> Grid:
    """Uniform tau grid over the window support, widened to cover ``extra``."""
    if f is None:
        if not extra:
            raise DomainError("need a window or explicit times to build a grid")
        lo, hi = min(extra), max(extra)
    else:
        lo, hi = f.tau_support(bg)
        if extra:
            lo, hi = min(lo, min(extra)), max(hi, max(extra))
    if not bg.contains(lo, strict=False) or not bg.contains(hi, strict=False):
        raise DomainError("requested times outside the working interval")
    return Grid.uniform(lo, hi, n)


def solve_mode(bg: Background, f: Optional[WindowFunction], p: float, initial: tuple,
               tau0: float, grid: Optional[Grid] = None, tol: float = 1e-12,
               check_normalization: bool = True) -> ModeSolution:
    """Solve the mode equation with data T(tau0) = z, dT(tau0) = w."""
    if p < 0:
        raise DomainError("momentum must be non-negative")
    z, w = complex(initial[0]), complex(initial[1])
    if check_normalization and abs(w * np.conj(z) - np.conj(w) * z + 1j) > NORMALIZATION_TOL:
        raise ContractError("initial data violate w z* - w* z = -i")
    if grid is None:
        grid = working_grid(bg, f, extra=(tau0,))
    lo, hi = min(grid.lo, tau0), max(grid.hi, tau0)
    dense = solve_linear(bg.omega_sq_fn(p), np.array([z]), np.array([w]), tau0, lo, hi,
                         tol=tol, breakpoints=bg.breakpoints)

    def evaluate(t):
        y, dy = dense(t)
        return y[0], dy[0]

    return mode_from_function(p, grid, evaluate, bg)


class CommutatorTable:
    """Delta_p(tau, tau') = v(tau) u(tau') - u(tau) v(tau') from a real
    fundamental pair normalized at tau_r (u = 1, u' = 0, v = 0, v' = 1)."""

    def __init__(self, bg: Background, p: float, grid: Grid, tau_r: float, tol: float = 1e-12):
        if not grid.lo <= tau_r <= grid.hi:
            raise DomainError("reference time must lie inside the grid")
        self.background = bg
        self.p = float(p)
        self.grid = grid
        self.tau_r = float(tau_r)
        self.tol = tol
        self._omega_sq = bg.omega_sq_fn(self.p)
        self._dense = solve_linear(
            self._omega_sq, np.array([1.0, 0.0]), np.array([0.0, 1.0]), self.tau_r,
            grid.lo, grid.hi, tol=tol, breakpoints=bg.breakpoints,
        )

    def pair(self, tau):
        """(u, v, u', v') at the given times."""
        y, dy = self._dense(tau)
        return y[0], y[1], dy[0], dy[1]

    def omega_sq(self, tau):
        return self.background.omega_sq(self.p, tau)

    def _outer(self, tau, taup, d1, d2):
        tau = np.asarray(tau, dtype=float)
        taup = np.asarray(taup, dtype=float)
        tb, tpb = np.broadcast_arrays(tau, taup)
        u, v, du, dv = self.pair(tb.ravel())
        up, vp, dup, dvp = self.pair(tpb.ravel())
        a_u, a_v = (du, dv) if d1 else (u, v)
        b_u, b_v = (dup, dvp) if d2 else (up, vp)
        out = a_v * b_u - a_u * b_v
        return out.reshape(tb.shape) if tb.ndim else float(out[0])

    def delta(self, tau, taup):
        return self._outer(tau, taup, False, False)

    def d_tau(self, tau, taup):
        """d/dtau Delta(tau, tau')."""
        return self._outer(tau, taup, True, False)

    def d_taup(self, tau, taup):
        """d/dtau' Delta(tau, tau')."""
        return self._outer(tau, taup, False, True)

    def d_mixed(self, tau, taup):
        return self._outer(tau, taup, True, True)

    def blocks(self, tau, taup):
        """All four of Delta, d_tau, d_taup, d_mixed on the outer grid tau x taup."""
        u, v, du, dv = self.pair(np.asarray(tau, dtype=float))
        up, vp, dup, dvp = self.pair(np.asarray(taup, dtype=float))
        D = np.outer(v, up) - np.outer(u, vp)
        D1 = np.outer(dv, up) - np.outer(du, vp)
        D2 = np.outer(v, dup) - np.outer(u, dvp)
        D12 = np.outer(dv, dup) - np.outer(du, dvp)
        return D, D1, D2, D12


def commutator(bg: Background, p: float, grid: Grid, tau_r: Optional[float] = None,
               tol: float = 1e-12) -> CommutatorTable:
    """Commutator table on ``grid``; tau_r defaults to the grid midpoint."""
    if tau_r is None:
        tau_r = 0.5 * (grid.lo + grid.hi)
    return CommutatorTable(bg, p, grid, tau_r, tol)


def delta_from_solution(S: ModeSolution, tau, taup):
    """i (S(tau) S(tau')* - c.c.) for a normalized solution S."""
    s1, _ = S(np.atleast_1d(tau))
    s2, _ = S(np.atleast_1d(taup))
    return np.real(1j * (s1 * np.conj(s2) - np.conj(s1) * s2))


def delta_identity_residual(table: CommutatorTable, tau, taup, tau0):
    """|d0 D(t,t0) D(t',t0) - D(t,t0) d0 D(t',t0) - D(t,t')|."""
    lhs = (table.d_taup(tau, tau0) * table.delta(taup, tau0)
           - table.delta(tau, tau0) * table.d_taup(taup, tau0))
    return np.abs(lhs - table.delta(tau, taup))


def _modulus(sol: ModeSolution, tau=None):
    if tau is None:
        T, dT = sol.value, sol.derivative
        tau = sol.grid.points
    else:
        T, dT = sol(tau)
    xi = np.abs(T)
    if np.any(xi == 0):
        raise SingularityError("mode modulus vanishes")
    return np.asarray(tau), T, dT, xi


def ermakov_residual(sol: ModeSolution, bg: Optional[Background] = None, tau=None):
    """Scaled residual of xi'' + w^2 xi - 1/(4 xi^3) for xi = |T|.

    xi'' is formed from T, T' and T'' = -w^2 T, so the residual reduces to
    the modulus equation's dependence on the Wronskian, Im(T' T*)^2 = 1/4.
    """
    bg = bg or sol.background
    tau, T, dT, xi = _modulus(sol, tau)
    w2 = bg.omega_sq(sol.p, tau)
    dxi = np.real(dT * np.conj(T)) / xi
    d2xi = (np.abs(dT) ** 2 - w2 * xi ** 2 - dxi ** 2) / xi
    res = d2xi + w2 * xi - 1.0 / (4.0 * xi ** 3)
    scale = np.abs(w2 * xi) + np.abs(d2xi) + 1.0 / (4.0 * xi ** 3)
    return np.abs(res) / scale


def gaussian_covariance(sol: ModeSolution, tau):
    """Xi = dT*/T* and the equivalent (i + d|T|^2)/(2|T|^2), as a pair."""
    tau, T, dT, xi = _modulus(sol, np.atleast_1d(np.asarray(tau, dtype=float)))
    first = np.conj(dT) / np.conj(T)
    second = (1j + 2.0 * np.real(dT * np.conj(T))) / (2.0 * xi ** 2)
    return first, second


def energy_density_identity(sol: ModeSolution, f: WindowFunction, bg: Optional[Background] = None,
                            n_panels: Optional[int] = None):
    """Window averages of the modulus-phase and the mode forms of the energy."""
    bg = bg or sol.background
    nodes, weights = window_rule(bg, f, n_panels or default_panels(bg, f, sol.p))
    T, dT = sol(nodes)
    xi = np.abs(T)
    dxi = np.real(dT * np.conj(T)) / xi
    w2 = bg.omega_sq(sol.p, nodes)
    lhs = 0.5 * np.sum(weights * (dxi ** 2 + w2 * xi ** 2 + 1.0 / (4.0 * xi ** 2)))
    rhs = 0.5 * np.sum(weights * (np.abs(dT) ** 2 + w2 * xi ** 2))
    return float(lhs), float(rhs)
