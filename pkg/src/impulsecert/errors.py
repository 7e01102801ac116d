"""Exception types shared across the toolkit."""


class ImpulseCertError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(ImpulseCertError):
    """Matrix or vector dimensions are inconsistent with the operation."""


class SymmetryError(ImpulseCertError):
    """A matrix required to be symmetric is asymmetric beyond tolerance."""


class DefinitenessError(ImpulseCertError):
    """A matrix required to be positive definite is not."""

    def __init__(self, message, offending_eigenvalue=None):
        super().__init__(message)
        self.offending_eigenvalue = offending_eigenvalue


class NotHurwitzError(ImpulseCertError):
    """A matrix required to be Hurwitz has an eigenvalue with Re >= 0."""


class NumericsError(ImpulseCertError):
    """An iterative numerical routine failed to deliver its contract."""


class SchemaError(ImpulseCertError):
    """A system document violates the JSON schema."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class FitError(ImpulseCertError):
    """A regression/fit is undefined for the given data."""
