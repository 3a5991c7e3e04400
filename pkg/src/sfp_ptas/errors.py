"""Exception types shared across the solver pipeline."""

from __future__ import annotations


class SfpError(Exception):
    """Base class for all package-specific errors."""


class MetricValidationError(SfpError):
    """Raised when a distance matrix fails symmetry/triangle/zero-diagonal checks."""


class EmptyInstanceError(SfpError):
    """Raised when an operation requires at least one terminal pair."""


class DegenerateInstanceError(SfpError):
    """Raised when every terminal pair has distance zero (nothing to solve)."""


class NotATreeError(SfpError):
    """Raised when a forest argument was required to be a single tree."""


class NotPortalRespectingError(SfpError):
    """Raised when a forest violates the portal-crossing discipline of a decomposition."""


class BudgetExceededError(SfpError):
    """Raised when an exact solver would exceed its configured size or time budget."""


class PreconditionUnverifiable(SfpError):
    """Raised when a check depends on an assumption (e.g. optimality of the
    input) that the caller did not explicitly vouch for."""


class CapExceeded(SfpError):
    """Raised internally when a table or enumeration cap is hit in strict mode.

    The dynamic program normally records cap hits as flags on its statistics
    object instead of raising; this exception exists for callers that want
    hard failure semantics.
    """
