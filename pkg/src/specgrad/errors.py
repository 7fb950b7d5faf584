"""Exception hierarchy shared by every module."""


class SpecgradError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SpecgradError, ValueError):
    """An STFT, detector or optimizer configuration violates its invariants."""


class DimensionError(SpecgradError, ValueError):
    """Array lengths or shapes do not agree."""


class DegenerateInputError(SpecgradError, ValueError):
    """Input is valid in form but numerically degenerate (e.g. zero energy)."""


class FormatError(SpecgradError, ValueError):
    """A file is malformed or does not match its declared format."""


class UnsupportedFormatError(FormatError):
    """A well-formed file uses a variant this toolkit does not handle."""


class EvaluationError(SpecgradError, ArithmeticError):
    """A loss evaluation produced a non-finite value."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DivergenceError(SpecgradError, ArithmeticError):
    """Optimization produced a non-finite loss or gradient.

    ``trace`` carries whatever was recorded before the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
