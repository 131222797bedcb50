"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific class that applies.
"""

from __future__ import annotations


class DctrwError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DctrwError, ValueError):
    """A model, config, or argument value is outside its documented domain."""


class ParseError(DctrwError):
    """An input file could not be parsed.

    Carries enough context to point the user at the offending line.
    """

    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        prefix = ""
        if source is not None:
            prefix = f"{source}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class NumericError(DctrwError):
    """A numerical procedure failed to produce a trustworthy result."""


class ConvergenceError(NumericError):
    """An iterative procedure hit its term or iteration cap before converging."""


class MethodFailureError(NumericError):
    """A numerical method detected that it is unsuitable for the given input."""


class EstimationError(DctrwError):
    """The supplied data is insufficient or unsuitable for estimation."""
