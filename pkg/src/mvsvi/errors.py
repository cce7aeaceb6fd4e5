"""Exception types shared across the package."""


class MVSVIError(Exception):
    """Base class for all package errors."""


class InvalidParams(MVSVIError, ValueError):
    """A constructor or operation received parameters outside its domain."""


class NonConvergence(MVSVIError, ArithmeticError):
    """An iterative numerical routine failed to converge within its cap."""


class NonFinite(MVSVIError, ArithmeticError):
    """A coefficient evaluation produced NaN or an infinity."""


class OutOfRange(MVSVIError, IndexError):
    """A noise query addressed a step outside the time grid."""


class DegenerateFit(MVSVIError, ValueError):
    """A log-log rate fit was requested on non-positive or too few errors."""


class AssumptionViolation(MVSVIError):
    """A declared regularity bound failed on a sampled witness.

    ``report`` carries the full validation report; ``witness`` the first
    failing check's worst sample.
    """

    def __init__(self, message, report=None, witness=None):
        super().__init__(message)
        self.report = report
        self.witness = witness


class ConfigError(MVSVIError, ValueError):
    """Experiment parameters are inconsistent (raised at run time)."""


class ParseError(ConfigError):
    """The scenario file is not syntactically valid."""

    def __init__(self, message, line=None, column=None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{loc}")
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    """One or more scenario fields violate their constraints.

    All problems found during a load are collected in ``errors``.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.errors))


class NoConvergenceWarning(UserWarning):
    """Picard iteration hit its iteration cap above tolerance."""
