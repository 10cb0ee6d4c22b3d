"""Exception types shared across the package."""


class NvAcousticError(Exception):
    """Base class for all package errors."""


class ValidationError(NvAcousticError, ValueError):
    """An input violated a documented precondition or invariant."""


class ConvergenceError(NvAcousticError, RuntimeError):
    """A fit or integration failed to converge within its budget."""


class EvolutionError(ConvergenceError):
    """Density-matrix evolution produced an invalid state or underflowed."""


class MissingCoefficientError(ValidationError):
    """A susceptibility required by a nonzero stress component is absent."""

    def __init__(self, name: str, reason: str = ""):
        self.name = name
        msg = f"susceptibility '{name}' is required but not provided"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)
