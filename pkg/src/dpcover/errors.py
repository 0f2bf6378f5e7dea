"""Exception types shared across the package."""


class DpcoverError(Exception):
    """Base class for all package errors."""


class InputError(DpcoverError, ValueError):
    """Invalid argument values (non-finite entries, bad dimensions, ...)."""


class InfeasibleError(DpcoverError):
    """Constraint set admits no point."""


class SizeError(DpcoverError):
    """Problem exceeds the exact-solver size cap; caller must subsample."""


class ExhaustionError(DpcoverError):
    """Remaining sample-point mass cannot satisfy the requested demand."""


class ScenarioError(DpcoverError, ValueError):
    """Scenario file violates the schema or is internally inconsistent."""
