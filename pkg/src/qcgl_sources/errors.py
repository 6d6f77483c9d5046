"""Exception hierarchy.

Every error raised for a parameter set or configuration that lies outside
the regime where an object is defined derives from :class:`DomainError`;
the command line maps those to exit code 2.
"""


class QcglError(Exception):
    """Base class for all package errors."""


class DomainError(QcglError, ValueError):
    """Inputs outside the region where the requested object exists."""


class GridError(DomainError):
    pass


class NoRealRootError(DomainError):
    pass


class NotASourceError(DomainError):
    pass


class DegenerateWaveTrainError(DomainError):
    pass


class AnsatzUndefinedError(DomainError):
    pass


class ConvergenceError(QcglError, RuntimeError):
    """An iterative solver failed; ``history`` holds its residual norms."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class PhaseConditionError(DomainError):
    pass


class SingularJacobianError(ConvergenceError):
    pass


class HypothesisFailure(QcglError):
    """The double zero eigenvalue or the pairing matrix is not as assumed."""


class BlowUpError(QcglError, RuntimeError):
    pass


class FitError(QcglError):
    pass
