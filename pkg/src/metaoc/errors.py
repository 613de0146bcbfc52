"""Exception types raised across the package."""


class MetaOCError(Exception):
    """Base class for all package errors."""


class InvalidArgument(MetaOCError, ValueError):
    pass


class InvalidConfiguration(MetaOCError, ValueError):
    pass


class SynthesisFailed(MetaOCError):
    """No certified strongly stable gain could be produced.

    ``diagnostics`` holds whatever the synthesis step learned before failing.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class StabilityRejected(MetaOCError):
    """A gain failed strong-stability verification; ``violated`` names the inequality."""

    def __init__(self, message, violated):
        super().__init__(message)
        self.violated = violated


class DivergenceError(MetaOCError):
    pass


class NumericFailure(MetaOCError, ArithmeticError):
    pass
