"""Exception types shared across the package."""


class KpzError(Exception):
    """Base class for all package errors."""


class ParameterError(KpzError):
    """Invalid parameter value (bad distribution parameter, theta >= 1, ...)."""


class BoundsError(KpzError):
    """Site outside the grid."""


class UnreachableError(KpzError):
    """Target not reachable by an up-right path from the source."""


class InfeasibleError(KpzError):
    """No admissible configuration exists (e.g. no disjoint ordered path pair)."""


class RangeError(KpzError):
    """Requested coordinate maps outside the lattice."""


class InsufficientDataError(KpzError):
    """Too few hits/samples to produce the requested estimate."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class EmptyEnsembleError(InsufficientDataError):
    """Rejection sampling produced no acceptances within the budget.

    Carries an upper confidence bound on the acceptance probability.
    """

    def __init__(self, message, acceptance_bound):
        super().__init__(message, achieved=0)
        self.acceptance_bound = acceptance_bound


class ReplayError(KpzError):
    """Manifest cannot be replayed (version mismatch, missing files, digest drift)."""
