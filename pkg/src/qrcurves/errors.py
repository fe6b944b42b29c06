"""Shared exception types.

All are ValueError subclasses so callers that only care about "bad input"
can catch one base class.
"""


class DimensionError(ValueError):
    """Ambient dimensions or degrees of two objects do not match."""


class DegreeError(ValueError):
    """Operation not defined for this form degree (overflow, degree 0, ...)."""


class DomainError(ValueError):
    """Point outside the declared domain of a map, form, or metric."""


class ExpressionError(ValueError):
    """Coefficient expression uses syntax outside the supported grammar."""


class ValidationError(ValueError):
    """Scenario configuration failed validation; message lists every defect."""
