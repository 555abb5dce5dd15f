"""Exception types shared across the package."""


class InvalidGeometry(ValueError):
    """Mesh generator was asked for a non-positive or undersized domain."""


class DegenerateElement(ValueError):
    """A triangle has (numerically) zero area."""


class FloorViolation(ValueError):
    """A degradation factor fell below the residual-stiffness floor."""


class ExponentOutOfRange(ValueError):
    """Gradient-norm exponent outside [1, 2)."""


class InvalidParameters(ValueError):
    """Extension parameters violate 0 < lambda < mu < 1."""


class SolverDiverged(RuntimeError):
    """An iterative solver hit its iteration cap.

    Carries the residual history so callers can report how far the solve got.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class ConfigError(ValueError):
    """Run configuration failed validation.

    ``errors`` is a list of (location, message) pairs, with locations of the
    form ``section.key``.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{loc}: {msg}" for loc, msg in self.errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
