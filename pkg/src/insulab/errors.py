"""Exception types shared across the package."""


class InsulabError(Exception):
    """Base class for all package errors."""


class MeshError(InsulabError):
    """Invalid or degenerate geometry input / mesh invariant violation."""


class CompatibilityError(InsulabError):
    """Neumann data violates the solvability condition of the linear system."""


class ConvergenceError(InsulabError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class StagnationError(InsulabError):
    """A descent iteration stopped making progress before converging."""


class CertificateError(InsulabError):
    """Minimality certificate cannot be applied to the supplied field."""


class BracketError(InsulabError):
    """A root bracket could not be established for bisection."""


class OutOfRegimeError(InsulabError):
    """Requested evaluation outside the validity regime of a formula."""
