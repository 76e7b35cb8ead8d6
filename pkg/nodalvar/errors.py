"""
Exceptions and warnings raised by the nodalvar library.

Everything derives from NodalVarError so callers (the management command in
particular) can tell library failures from programming errors.
"""


class NodalVarError(Exception):
    """Base class for every error raised by nodalvar."""


class DomainError(NodalVarError, ValueError):
    """An argument lies outside the domain of the function."""


class WindowError(NodalVarError, ValueError):
    """A frequency window cannot be constructed."""


class DegenerateCovarianceError(NodalVarError, ArithmeticError):
    """1 - Γ² is too small for the Kac–Rice conditioning."""


class FactorizationError(NodalVarError, ArithmeticError):
    """A covariance matrix is not positive semi-definite."""


class QuadratureError(NodalVarError, RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, value=None, error=None, panels=None):
        super().__init__(message)
        self.value = value
        self.error = error
        self.panels = panels


class MeshResolutionError(NodalVarError, ValueError):
    """The mesh is too coarse to resolve the nodal lines of a window."""

    def __init__(self, message, minimum_level):
        super().__init__(message)
        self.minimum_level = minimum_level


class OracleDisagreementError(NodalVarError, RuntimeError):
    """The quadrature and Monte Carlo norm-product oracles disagree."""


class ConfigError(NodalVarError):
    """An experiment config file is malformed or fails validation."""

    def __init__(self, problems):
        # problems: list of (line number or None, message)
        self.problems = list(problems)
        super().__init__("; ".join(self.format_problem(p) for p in self.problems))

    @staticmethod
    def format_problem(problem):
        line, message = problem
        if line is None:
            return message
        return f"line {line}: {message}"


class AsymptoticRegimeWarning(UserWarning):
    """An asymptotic expansion is evaluated outside its large-ψ regime."""


class SeriesRegimeWarning(UserWarning):
    """The norm-product series is evaluated outside its radius guard."""
