"""
Exception classes for scatlab.
"""
from typing import Any, Dict, List, Optional


class ScatlabError(Exception):
    """Base exception class for all scatlab errors."""
    exit_code = 1

    def __init__(self, message: str, record: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.record = record or {}


class DomainError(ScatlabError, ValueError):
    """Raised when a parameter lies outside its mathematical domain."""
    exit_code = 4


class SingularEvaluationError(DomainError):
    """Raised when a kernel or potential is evaluated at a singular point."""
    pass


class IndexRangeError(DomainError):
    """Raised when a harmonic index or quadrature degree is out of range."""
    pass


class ShapeMismatchError(ScatlabError):
    """Raised when sampled fields do not share a grid, shape or role."""
    exit_code = 4


class PreconditionError(ScatlabError):
    """Raised when an operation refuses its inputs."""
    exit_code = 4


class SupportMarginError(PreconditionError):
    """Raised when a sampled field reaches too close to the box boundary."""
    pass


class DecayClassError(PreconditionError):
    """Raised when a potential lies outside the short-range class."""
    pass


class DivergenceError(PreconditionError):
    """Raised when a magnetic field is not divergence free."""
    pass


class ConstructionError(PreconditionError):
    """Raised when a constructed vector potential fails its curl or contour checks."""
    pass


class AgreementError(PreconditionError):
    """Raised when a potential pair differs outside the prescribed ball."""
    pass


class ResonanceProximityError(PreconditionError):
    """Raised when a radius sits too close to a Dirichlet eigenvalue."""
    pass


class SolverError(ScatlabError):
    """Raised when a numerical solve fails."""
    exit_code = 3


class ConvergenceError(SolverError):
    """Raised when an iterative solve does not reach its tolerance."""

    def __init__(self, message: str, residual_history: Optional[List[float]] = None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class ResonanceError(ConvergenceError):
    """Raised when the system is ill conditioned; shift the energy and retry."""
    pass


class NeumannDivergenceError(ConvergenceError):
    """Raised when a Neumann series fails to contract."""

    def __init__(
        self,
        message: str,
        spectral_radius: float,
        residual_history: Optional[List[float]] = None,
    ):
        super().__init__(message, residual_history)
        self.spectral_radius = spectral_radius


class ConfigError(ScatlabError):
    """Raised when an experiment config violates the schema."""
    exit_code = 2


class CacheError(ScatlabError):
    """Raised when a cache entry cannot be read."""
    pass
