"""Error types raised across the package."""


class SLEError(Exception):
    """Base class for all package errors."""


class DomainError(SLEError, ValueError):
    """Input outside the domain where an operation is defined."""


class ContractError(SLEError, ValueError):
    """A precondition on the inputs (e.g. Wronskian normalization) is violated."""


class StiffnessError(SLEError, RuntimeError):
    """The ODE integrator could not make progress (step-size underflow)."""


class AccuracyError(SLEError, RuntimeError):
    """Quadrature did not reach the requested tolerance.

    The best available estimate is kept on ``estimate``.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ConsistencyError(SLEError, RuntimeError):
    """A numerical-consistency check failed (e.g. c1 <= |c2|)."""


class DegenerateError(DomainError):
    """The SLE data are degenerate (4KJ - Jdot^2 vanishes)."""


class CapabilityError(SLEError, ValueError):
    """The background does not provide enough derivatives for the request."""


class SingularityError(SLEError, ArithmeticError):
    """A quantity divides by a vanishing mode modulus."""
