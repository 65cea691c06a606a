"""scikit-learn style wrappers.

``StateOfLowEnergy`` is fitted on momenta and then evaluated on times:
``predict`` gives |T_p(tau)|^2, ``transform`` the complex mode.
``PowerSpectrumEstimator`` maps p/H to the seed-time power spectrum.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .background import Background, WindowFunction, window_family
from .exceptions import DomainError
from .modes import working_grid
from .preinflation import PreInflationModel, power_spectrum
from .sle_core import sle_state


def _column(X, name):
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise DomainError(f"{name} must be a single column")
        X = X[:, 0]
    return X


class StateOfLowEnergy(BaseEstimator):
    """SLE modes for a background and window.

    Parameters
    ----------
    background : Background
    window : WindowFunction
    route : {'commutator', 'fiducial'}
    tol : float
        ODE tolerance.
    grid_size : int
        Points of the working grid stored with each mode.
    tau0 : float or None
        Reference time of the commutator route.
    """

    def __init__(self, background=None, window=None, route="commutator", tol=1e-12,
                 grid_size=512, tau0=None):
        self.background = background
        self.window = window
        self.route = route
        self.tol = tol
        self.grid_size = grid_size
        self.tau0 = tau0

    def _validate_params(self):
        if not isinstance(self.background, Background):
            raise DomainError("background must be a Background")
        if not isinstance(self.window, WindowFunction):
            raise DomainError("window must be a WindowFunction")
        if self.route not in ("commutator", "fiducial"):
            raise DomainError(f"unknown route {self.route!r}")
        if not 1e-14 < float(self.tol) < 1e-3:
            raise DomainError("tol must lie in (1e-14, 1e-3)")
        if int(self.grid_size) < 16:
            raise DomainError("grid_size must be at least 16")

    def fit(self, X, y=None):
        """X: momenta, shape (n,) or (n, 1)."""
        self._validate_params()
        p = _column(X, "momenta")
        if np.any(p < 0):
            raise DomainError("momenta must be non-negative")
        extra = () if self.tau0 is None else (self.tau0,)
        grid = working_grid(self.background, self.window, int(self.grid_size), extra)
        self.results_ = [sle_state(self.background, self.window, float(q), route=self.route,
                                   grid=grid, tau0=self.tau0, tol=self.tol) for q in p]
        self.momenta_ = p
        self.energy_ = np.array([r.energy for r in self.results_])
        self.grid_ = grid.points
        return self

    def transform(self, X):
        """Complex modes at times X: shape (n_times, n_momenta)."""
        check_is_fitted(self, "results_")
        tau = _column(X, "times")
        return np.stack([r.mode(tau)[0] for r in self.results_], axis=1)

    def predict(self, X):
        """|T_p(tau)|^2 at times X: shape (n_times, n_momenta)."""
        return np.abs(self.transform(X)) ** 2


class PowerSpectrumEstimator(BaseEstimator):
    """Seed-time SLE power spectrum for the kinetic -> de Sitter model."""

    def __init__(self, H=1.0, eta1=-0.3, eta2=0.5, w=0.5, convention="cosmological", route="auto"):
        self.H = H
        self.eta1 = eta1
        self.eta2 = eta2
        self.w = w
        self.convention = convention
        self.route = route

    def fit(self, X=None, y=None):
        self.model_ = PreInflationModel(float(self.H))
        self.window_ = window_family(self.eta1 / self.H, self.eta2 / self.H, self.w,
                                     convention=self.convention)
        self.model_.check_window(self.window_)
        return self

    def predict(self, X):
        """X: p/H values; returns P."""
        check_is_fitted(self, "model_")
        ps = _column(X, "p/H")
        if np.any(ps <= 0):
            raise DomainError("momenta must be positive")
        return np.array([power_spectrum(self.model_, self.window_, q * self.H, self.route)
                         for q in ps])
