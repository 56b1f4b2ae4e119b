"""Exception hierarchy.

Every error carries a short machine-readable ``code`` used by the CLI.
Validation-type errors derive from :class:`ValidationError`, numerical
failures from :class:`NumericalError`.
"""


class BonnetMyersError(Exception):
    code = "error"


class ValidationError(BonnetMyersError, ValueError):
    code = "validation"


class NumericalError(BonnetMyersError, RuntimeError):
    code = "numerical"


class DomainError(ValidationError):
    code = "domain"


class MonotonicityError(ValidationError):
    code = "non_monotone"


class PositivityError(ValidationError):
    code = "non_positive"


class UnboundedDomainError(ValidationError):
    code = "unbounded_domain"


class PreconditionError(ValidationError):
    code = "precondition"


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance.

    ``value`` and ``error`` hold the best estimate available at the time.
    """

    code = "quadrature"

    def __init__(self, message, value=float("nan"), error=float("inf")):
        super().__init__(message)
        self.value = value
        self.error = error


class IntegrationError(NumericalError):
    """ODE integration failed; ``radius`` is where it stopped."""

    code = "integration"

    def __init__(self, message, radius=float("nan")):
        super().__init__(message)
        self.radius = radius
