"""States of Low Energy for a linear scalar field on Friedmann-Lemaitre backgrounds."""

from .background import (Background, WindowFunction, abar, centered_window, custom, desitter,
                         minkowski, power_law, preinflation, tabulated, window_family)
from .exceptions import (AccuracyError, CapabilityError, ConsistencyError, ContractError,
                         DegenerateError, DomainError, SingularityError, SLEError, StiffnessError)
from .modes import ModeSolution, commutator, solve_mode, working_grid
from .sle_core import SLEResult, energy_functionals, sle_from_commutator, sle_from_fiducial, sle_state
from .estimator import PowerSpectrumEstimator, StateOfLowEnergy

__version__ = "0.1.0"

__all__ = [
    "Background", "WindowFunction", "abar", "centered_window", "custom", "desitter", "minkowski",
    "power_law", "preinflation", "tabulated", "window_family",
    "AccuracyError", "CapabilityError", "ConsistencyError", "ContractError", "DegenerateError",
    "DomainError", "SingularityError", "SLEError", "StiffnessError",
    "ModeSolution", "commutator", "solve_mode", "working_grid",
    "SLEResult", "energy_functionals", "sle_from_commutator", "sle_from_fiducial", "sle_state",
    "PowerSpectrumEstimator", "StateOfLowEnergy",
]
