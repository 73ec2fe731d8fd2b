"""Exception types shared across modules.

Infeasibility of a budgeted query is a result value (``None``), never an exception.
"""


class AdGrowthError(Exception):
    pass


class InvalidSpecError(AdGrowthError, ValueError):
    """Bad input: malformed space, group, groupoid, cover or parameter."""


class ResourceCapError(AdGrowthError):
    """A generator would exceed the configured point cap."""


class SolverCapError(AdGrowthError):
    """An exact solver was asked to handle more points than its cap."""


class PreconditionError(AdGrowthError, ValueError):
    """An operation's documented precondition does not hold."""


class VerificationError(AdGrowthError):
    """A constructed object failed its own verification."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class StageError(AdGrowthError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
