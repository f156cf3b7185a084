"""Exception hierarchy shared by all pipelines.

Usage errors (bad arguments, violated preconditions) are kept apart from
numerical failures so the CLI can map them to distinct exit codes.
"""


class SublevelKitError(Exception):
    """Base class for all package errors."""


class UsageError(SublevelKitError):
    """Malformed arguments: dimension mismatch, bad config values."""


class CapabilityError(SublevelKitError):
    """An optional oracle capability (gradient, batch) is required but absent."""


class PreconditionError(SublevelKitError):
    """A documented operation precondition does not hold (e.g. r <= -alpha)."""


class InfeasibleError(SublevelKitError):
    """The admissible region is empty or no feasible point could be produced."""


class OracleFaultError(SublevelKitError):
    """An oracle returned a non-finite value at a finite admissible point."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class UnboundedBelowError(SublevelKitError):
    """Objective values diverge to -inf on the admissible region.

    This violates the standing assumptions (the objective must be bounded
    below on every compact sublevel set) and is reported, not handled.
    """

    def __init__(self, message, best_value=None, best_point=None):
        super().__init__(message)
        self.best_value = best_value
        self.best_point = best_point


class NumericalError(SublevelKitError):
    """A solver failed to reach its tolerance; carries the best candidate."""

    def __init__(self, message, best_candidate=None, diagnostics=None):
        super().__init__(message)
        self.best_candidate = best_candidate
        self.diagnostics = diagnostics or {}


class InconsistencyError(SublevelKitError):
    """Two independent computations of the same quantity disagree.

    Signals a failed inner global subproblem; both candidates are attached
    so the caller can inspect them.
    """

    def __init__(self, message, candidates=None):
        super().__init__(message)
        self.candidates = candidates or []
