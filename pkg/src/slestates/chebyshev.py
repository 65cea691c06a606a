"""Piecewise Chebyshev representations for cumulative integrals and derivatives."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C

from .exceptions import AccuracyError, DomainError


def cheb_points(deg: int) -> np.ndarray:
    """Chebyshev points of the first kind on [-1, 1]."""
    k = np.arange(deg + 1)
    return np.cos(np.pi * (k + 0.5) / (deg + 1))[::-1]


def _fit(values: np.ndarray, deg: int) -> np.ndarray:
    """Coefficients of the interpolant through values at cheb_points(deg)."""
    x = cheb_points(deg)
    V = C.chebvander(x, deg)
    return np.linalg.solve(V, values)


class PiecewiseChebyshev:
    """Function on [edges[0], edges[-1]] as one Chebyshev series per piece.

    Values may be complex (and may carry a trailing batch axis).
    """

    def __init__(self, edges: Sequence[float], coeffs: Sequence[np.ndarray]):
        self.edges = np.asarray(edges, dtype=float)
        self.coeffs = [np.asarray(c) for c in coeffs]
        if len(self.coeffs) != self.edges.size - 1:
            raise DomainError("one coefficient array per piece required")

    @classmethod
    def interpolate(cls, fn: Callable, edges: Sequence[float], deg: int = 48,
                    check: bool = True, tol: float = 1e-13) -> "PiecewiseChebyshev":
        """Interpolate fn (vectorized) on each piece; degree doubled until
        the trailing coefficients fall below ``tol`` relative to the head."""
        edges = np.asarray(edges, dtype=float)
        coeffs = []
        for a, b in zip(edges[:-1], edges[1:]):
            d = deg
            while True:
                x = 0.5 * (a + b) + 0.5 * (b - a) * cheb_points(d)
                c = _fit(np.asarray(fn(x)), d)
                head = np.max(np.abs(c))
                tail = np.max(np.abs(c[-4:]))
                if not check or tail <= tol * max(head, 1e-300) or head == 0:
                    break
                if d >= 512:
                    raise AccuracyError(f"Chebyshev interpolation did not resolve [{a}, {b}]",
                                        estimate=None, error=tail)
                d *= 2
            coeffs.append(c)
        return cls(edges, coeffs)

    def _locate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tol = 1e-12 * max(1.0, np.max(np.abs(self.edges)))
        if np.any(t < self.edges[0] - tol) or np.any(t > self.edges[-1] + tol):
            raise DomainError("evaluation outside the Chebyshev domain")
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.coeffs) - 1)
        return t, idx

    def __call__(self, t):
        t, idx = self._locate(t)
        first = self.coeffs[0]
        out = np.empty(t.shape + first.shape[1:], dtype=np.result_type(*self.coeffs, float))
        for i in np.unique(idx):
            a, b = self.edges[i], self.edges[i + 1]
            mask = idx == i
            x = (2.0 * t[mask] - (a + b)) / (b - a)
            out[mask] = C.chebval(x, self.coeffs[i]).T if first.ndim > 1 else C.chebval(x, self.coeffs[i])
        return out

    def derivative(self) -> "PiecewiseChebyshev":
        out = []
        for (a, b), c in zip(zip(self.edges[:-1], self.edges[1:]), self.coeffs):
            out.append(C.chebder(c) * (2.0 / (b - a)))
        return PiecewiseChebyshev(self.edges, out)

    def cumulative(self) -> "PiecewiseChebyshev":
        """Antiderivative vanishing at edges[0], continuous across pieces."""
        out = []
        offset = 0.0
        for (a, b), c in zip(zip(self.edges[:-1], self.edges[1:]), self.coeffs):
            ci = C.chebint(c, lbnd=-1) * (0.5 * (b - a))
            ci[0] = ci[0] + offset
            out.append(ci)
            offset = C.chebval(1.0, ci)
        return PiecewiseChebyshev(self.edges, out)
