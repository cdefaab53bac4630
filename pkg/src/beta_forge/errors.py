"""Exception hierarchy shared by every module."""


class BetaForgeError(Exception):
    pass


class ValidationError(BetaForgeError, ValueError):
    """Malformed input: bad labels, out-of-range parameters, dimension mismatch."""


class BudgetError(BetaForgeError):
    """A construction would exceed the configured vertex or evaluation budget."""


class InfeasibleConfigError(ValidationError):
    pass


class VacuousRangeError(ValidationError):
    """Separation threshold outside (0, 2]: no two unit-ball points are that far apart."""


class PreconditionError(BetaForgeError):
    pass


class MissingPointsError(BetaForgeError):
    def __init__(self, message, missing):
        super().__init__(message)
        self.missing = missing


class LiftingError(BetaForgeError):
    def __init__(self, message, vertex, details=None):
        super().__init__(message)
        self.vertex = vertex
        self.details = details or {}
