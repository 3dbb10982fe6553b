"""Exception and warning types shared across the package."""


class EwcaError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(EwcaError):
    """Incompatible or inadmissible array dimensions (e.g. k >= d)."""


class NonFiniteError(EwcaError):
    """Input contains NaN or infinite entries."""


class ConfigError(EwcaError):
    """Invalid solver or experiment configuration value."""


class NotSymmetricError(EwcaError):
    """Matrix expected to be symmetric is not, beyond tolerance."""


class RankDeficientError(EwcaError):
    """Matrix expected to have full column rank does not."""


class NumericalUnderflowError(EwcaError):
    """Standard-domain Sinkhorn underflowed; retry in log domain."""


class EmptySetError(EwcaError):
    """An operation received an empty train or test set."""


class ParseError(EwcaError):
    """Malformed input file."""

    def __init__(self, message, path=None, line=None, column=None):
        context = []
        if path is not None:
            context.append(f"file {path}")
        if line is not None:
            context.append(f"line {line}")
        if column is not None:
            context.append(f"column {column}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.path = path
        self.line = line
        self.column = column


class RaggedRowsError(ParseError):
    """CSV rows do not all have the same number of fields."""


class NonNumericCellError(ParseError):
    """A data cell could not be parsed as a number."""


class UnknownLabelColumnError(ParseError):
    """The requested label column does not exist in the file."""


class NonConvergenceWarning(UserWarning):
    """Iteration cap reached before the convergence tolerance was met."""


class DegenerateSpectrumWarning(UserWarning):
    """Eigengap at the cut position is numerically zero; the returned basis
    is one of many valid choices and only its projector is well defined."""
