"""Exception hierarchy shared across the package."""


class WattributeError(Exception):
    """Base class for every error this package raises deliberately."""


class ConfigError(WattributeError):
    """Invalid configuration or command usage. The CLI maps this to exit code 2."""


class ValidationError(WattributeError):
    """A domain invariant was violated (negative power, bad dimensions, ...)."""


class SchemaMismatchError(ValidationError):
    """A model and a design matrix disagree on the feature schema."""


class TraceParseError(WattributeError):
    """A trace file line could not be parsed. Carries the 1-based line number."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class TraceWriteError(WattributeError):
    """Writing a trace failed. Carries how many records made it to disk."""

    def __init__(self, message: str, records_written: int = 0):
        super().__init__(message)
        self.records_written = records_written


class PowerFetchError(WattributeError):
    """The power endpoint was unreachable or returned an unusable response."""


class FitError(WattributeError):
    """Fitting could not proceed (no process rows, no usable features, ...)."""


class SplitError(WattributeError):
    """Too few intervals, or the requested fraction leaves a side empty."""


class DegenerateInputError(WattributeError):
    """A statistic is undefined for the given input (e.g. a constant vector)."""
