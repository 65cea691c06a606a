"""Window-averaged energy functionals and the State of Low Energy.

Two constructions are provided. The fiducial route diagonalizes the energy
pair (c1, c2) of any normalized solution by a Bogoliubov rotation. The
commutator route builds the minimizer directly from Delta_p through the
functionals J, K and dJ/dtau0, with no reference solution at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .background import Background, WindowFunction, centered_window, default_panels, window_rule
from .exceptions import ConsistencyError, DegenerateError, DomainError
from .modes import (
    CommutatorTable,
    ModeSolution,
    commutator,
    mode_from_function,
    working_grid,
)
from .numerics import Grid

PHASE_ZERO_TOL = 1e-12
DEGENERACY_TOL = 1e-14


@dataclass(frozen=True)
class EnergyPair:
    """c1 = E_p[S] (real) and c2 = D_p[S] (complex)."""

    c1: float
    c2: complex

    @property
    def invariant(self) -> float:
        """c1^2 - |c2|^2 (Bogoliubov invariant)."""
        return self.c1 * self.c1 - abs(self.c2) ** 2

    @property
    def energy(self) -> float:
        return math.sqrt(max(self.invariant, 0.0))


@dataclass(frozen=True)
class BogoliubovCoeffs:
    lam: complex
    mu: complex


@dataclass(frozen=True)
class JKData:
    J: float
    K: float
    Jdot: float

    @property
    def discriminant(self) -> float:
        return 4.0 * self.K * self.J - self.Jdot ** 2


@dataclass(frozen=True, eq=False)
class SLEResult:
    """The SLE mode with its energy and the J functional on the mode grid."""

    p: float
    mode: ModeSolution
    energy: float
    J_of_tau: np.ndarray
    route: str
    tau0: Optional[float] = None
    jk: Optional[JKData] = None
    pair: Optional[EnergyPair] = None
    coeffs: Optional[BogoliubovCoeffs] = None
    table: Optional[CommutatorTable] = field(default=None, repr=False)

    def modulus_sq(self, tau=None):
        if tau is None:
            return np.abs(self.mode.value) ** 2
        return np.abs(self.mode(tau)[0]) ** 2


def quadrature(bg: Background, f: WindowFunction, p: float, n_panels: Optional[int] = None):
    return window_rule(bg, f, n_panels or default_panels(bg, f, p))


def energy_functionals(S: ModeSolution, f: WindowFunction, bg: Optional[Background] = None,
                       n_panels: Optional[int] = None, check: bool = True) -> EnergyPair:
    """c1 = 1/2 int f^2 (|S'|^2 + w^2 |S|^2), c2 = 1/2 int f^2 (S'^2 + w^2 S^2)."""
    bg = bg or S.background
    if check and S.wronskian_residual > 1e-8:
        raise DomainError("energy functionals need a Wronskian-normalized solution")
    nodes, weights = quadrature(bg, f, S.p, n_panels)
    y, dy = S(nodes)
    w2 = bg.omega_sq(S.p, nodes)
    c1 = 0.5 * float(np.sum(weights * (np.abs(dy) ** 2 + w2 * np.abs(y) ** 2)))
    c2 = 0.5 * complex(np.sum(weights * (dy * dy + w2 * y * y)))
    pair = EnergyPair(c1, c2)
    if check and not c1 > abs(c2) * (1.0 - 1e-15):
        raise ConsistencyError(f"energy pair violates c1 > |c2| (c1={c1}, |c2|={abs(c2)})")
    return pair


def minimize_bogoliubov(pair: EnergyPair) -> BogoliubovCoeffs:
    """Bogoliubov coefficients (lambda, mu) minimizing the averaged energy."""
    c1, c2 = pair.c1, pair.c2
    if not c1 > abs(c2):
        raise DomainError("minimization requires c1 > |c2|")
    s = math.sqrt((c1 - abs(c2)) * (c1 + abs(c2)))
    ratio = c1 / (2.0 * s)
    mu = math.sqrt(max(ratio - 0.5, 0.0))
    phase = 0.0 if abs(c2) < PHASE_ZERO_TOL * c1 else -np.angle(c2)
    lam = -np.exp(1j * phase) * math.sqrt(ratio + 0.5)
    return BogoliubovCoeffs(complex(lam), complex(mu))


def sle_from_fiducial(S: ModeSolution, f: WindowFunction, bg: Optional[Background] = None,
                      n_panels: Optional[int] = None) -> SLEResult:
    """T = lambda S + mu S* with (lambda, mu) from the energy pair of S."""
    bg = bg or S.background
    pair = energy_functionals(S, f, bg, n_panels)
    co = minimize_bogoliubov(pair)
    T = S.rotated(co.lam, co.mu)
    s = pair.energy
    J = invariant_J(S, pair, S.grid.points)
    return SLEResult(S.p, T, s, J, "fiducial", pair=pair, coeffs=co)


def invariant_J(S: ModeSolution, pair: EnergyPair, tau):
    """J[S](tau) = 2 c1 |S|^2 - c2* S^2 - c2 S*^2."""
    y, _ = S(tau)
    return 2.0 * pair.c1 * np.abs(y) ** 2 - 2.0 * np.real(np.conj(pair.c2) * y * y)


def invariant_K(S: ModeSolution, pair: EnergyPair, tau):
    _, dy = S(tau)
    return 2.0 * pair.c1 * np.abs(dy) ** 2 - 2.0 * np.real(np.conj(pair.c2) * dy * dy)


def invariants_IJK(S: ModeSolution, f: WindowFunction, bg: Optional[Background] = None,
                   tau=None, n_panels: Optional[int] = None):
    """(I, J(tau), K(tau)) for any solution S (normalized or not)."""
    bg = bg or S.background
    pair = energy_functionals(S, f, bg, n_panels, check=False)
    tau = S.grid.points if tau is None else tau
    return pair.invariant, invariant_J(S, pair, tau), invariant_K(S, pair, tau)


# ---------------------------------------------------------------------------
# commutator route
# ---------------------------------------------------------------------------

def _pair_moments(table: CommutatorTable, nodes, weights):
    """A_xy = int f^2 (x' y' + w^2 x y) for x, y in the fundamental pair."""
    u, v, du, dv = table.pair(nodes)
    w2 = table.omega_sq(nodes)
    A_uu = float(np.sum(weights * (du * du + w2 * u * u)))
    A_uv = float(np.sum(weights * (du * dv + w2 * u * v)))
    A_vv = float(np.sum(weights * (dv * dv + w2 * v * v)))
    return A_uu, A_uv, A_vv


def _jk_arrays(table: CommutatorTable, nodes, weights, tau0):
    """J, K, Jdot at every tau0.

    Delta(tau, tau0) = v(tau) u(tau0) - u(tau) v(tau0) separates, so each
    functional is a quadratic form in the pair at tau0 whose coefficients
    are the window moments of the pair.
    """
    tau0 = np.atleast_1d(np.asarray(tau0, dtype=float))
    A_uu, A_uv, A_vv = _pair_moments(table, nodes, weights)
    u, v, du, dv = table.pair(tau0)
    J = 0.5 * (u * u * A_vv - 2.0 * u * v * A_uv + v * v * A_uu)
    K = 0.5 * (du * du * A_vv - 2.0 * du * dv * A_uv + dv * dv * A_uu)
    Jd = du * u * A_vv - (du * v + u * dv) * A_uv + dv * v * A_uu
    return J, K, Jd


def jk_functionals(table: CommutatorTable, f: WindowFunction, bg: Optional[Background] = None,
                   tau0: Optional[float] = None, n_panels: Optional[int] = None) -> JKData:
    """J, K and dJ/dtau0 at tau0 (default: the table's reference time)."""
    bg = bg or table.background
    tau0 = table.tau_r if tau0 is None else float(tau0)
    nodes, weights = quadrature(bg, f, table.p, n_panels)
    J, K, Jd = _jk_arrays(table, nodes, weights, [tau0])
    return JKData(float(J[0]), float(K[0]), float(Jd[0]))


def sle_energy(table: CommutatorTable, f: WindowFunction, bg: Optional[Background] = None,
               n_panels: Optional[int] = None) -> float:
    """E^2 = 1/4 int dtau0 f^2 [K(tau0) + w^2(tau0) J(tau0)]."""
    bg = bg or table.background
    nodes, weights = quadrature(bg, f, table.p, n_panels)
    J, K, _ = _jk_arrays(table, nodes, weights, nodes)
    e2 = 0.25 * float(np.sum(weights * (K + table.omega_sq(nodes) * J)))
    return math.sqrt(e2)


def minimal_data(jk: JKData):
    """(z, w, E) with z real positive; E = 1/2 sqrt(4KJ - Jdot^2)."""
    disc = jk.discriminant
    if not jk.J > 0 or disc <= DEGENERACY_TOL * 4.0 * jk.K * jk.J:
        raise DegenerateError("degenerate SLE data: 4KJ - Jdot^2 vanishes")
    E = 0.5 * math.sqrt(disc)
    z = math.sqrt(jk.J / (2.0 * E))
    w = jk.Jdot * z / (2.0 * jk.J) - 0.5j / z
    return z, w, E


def sle_from_commutator(table: CommutatorTable, f: WindowFunction,
                        bg: Optional[Background] = None, tau0: Optional[float] = None,
                        grid: Optional[Grid] = None, n_panels: Optional[int] = None,
                        nested_energy: bool = True) -> SLEResult:
    """T(tau) = Delta(tau, tau0) w - d_tau0 Delta(tau, tau0) z."""
    bg = bg or table.background
    tau0 = table.tau_r if tau0 is None else float(tau0)
    grid = grid or table.grid
    nodes, weights = quadrature(bg, f, table.p, n_panels)
    J0, K0, Jd0 = _jk_arrays(table, nodes, weights, [tau0])
    jk = JKData(float(J0[0]), float(K0[0]), float(Jd0[0]))
    z, w, E_loc = minimal_data(jk)

    def evaluate(t):
        t = np.asarray(t, dtype=float)
        T = table.delta(t, tau0) * w - table.d_taup(t, tau0) * z
        dT = table.d_tau(t, tau0) * w - table.d_mixed(t, tau0) * z
        return T, dT

    mode = mode_from_function(table.p, grid, evaluate, bg)
    J_grid, _, _ = _jk_arrays(table, nodes, weights, grid.points)
    if nested_energy:
        Jn, Kn, _ = _jk_arrays(table, nodes, weights, nodes)
        E = 0.5 * math.sqrt(float(np.sum(weights * (Kn + table.omega_sq(nodes) * Jn))))
    else:
        E = E_loc
    return SLEResult(table.p, mode, E, J_grid, "commutator", tau0=tau0, jk=jk, table=table)


def sle_state(bg: Background, f: WindowFunction, p: float, route: str = "commutator",
              grid: Optional[Grid] = None, tau0: Optional[float] = None,
              fiducial: Optional[ModeSolution] = None, tol: float = 1e-12,
              n_panels: Optional[int] = None) -> SLEResult:
    """Convenience wrapper: SLE at momentum p by either route."""
    from .modes import solve_mode

    if grid is None:
        grid = working_grid(bg, f, extra=() if tau0 is None else (tau0,))
    if route == "commutator":
        lo, hi = f.tau_support(bg)
        tgrid = Grid.uniform(min(lo, grid.lo), max(hi, grid.hi), 64)
        tau_r = 0.5 * (lo + hi)
        table = commutator(bg, p, tgrid, tau_r, tol)
        return sle_from_commutator(table, f, bg, tau0, grid, n_panels)
    if route == "fiducial":
        if fiducial is None:
            fiducial = default_fiducial(bg, f, p, grid, tol)
        return sle_from_fiducial(fiducial, f, bg, n_panels)
    raise DomainError(f"unknown route {route!r}")


def default_fiducial(bg: Background, f: WindowFunction, p: float, grid: Grid,
                     tol: float = 1e-12) -> ModeSolution:
    """Instantaneous positive-frequency data at the start of the support."""
    from .modes import solve_mode

    lo, _ = f.tau_support(bg)
    om2 = float(bg.omega_sq(p, lo))
    om = math.sqrt(om2) if om2 > 0 else 1.0
    z, w = 1.0 / math.sqrt(2.0 * om), -1j * math.sqrt(om / 2.0)
    return solve_mode(bg, f, p, (z, w), lo, grid, tol)


def two_point(res: SLEResult, tau, taup):
    """W(tau, tau') = T(tau) T(tau')*."""
    t1, _ = res.mode(np.atleast_1d(tau))
    t2, _ = res.mode(np.atleast_1d(taup))
    return t1 * np.conj(t2)


@dataclass(frozen=True)
class LimitRecord:
    widths: np.ndarray
    errors: np.ndarray
    orders: np.ndarray
    target: float


def instantaneous_limit_probe(bg: Background, p: float, tau0: float,
                              widths: Sequence[float], w: float = 0.5) -> LimitRecord:
    """| |T(tau0)|^2 - 1/(2 w_p(tau0)) | for windows shrinking around tau0."""
    widths = np.asarray(widths, dtype=float)
    if np.any(np.diff(widths) >= 0):
        raise DomainError("widths must be strictly decreasing")
    target = 0.5 / math.sqrt(float(bg.omega_sq(p, tau0)))
    errs = []
    for width in widths:
        f = centered_window(bg, tau0, width, w)
        grid = working_grid(bg, f, n=32)
        table = commutator(bg, p, grid, tau0)
        res = sle_from_commutator(table, f, bg, tau0, grid, nested_energy=False)
        errs.append(abs(float(res.modulus_sq(np.array([tau0]))[0]) - target))
    errs = np.array(errs)
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = np.log(errs[:-1] / errs[1:]) / np.log(widths[:-1] / widths[1:])
    return LimitRecord(widths, errs, orders, target)
