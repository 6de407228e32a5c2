"""Exception hierarchy for the uncollapse package."""


class UncollapseError(Exception):
    """Base class for all package errors."""


class DomainError(UncollapseError, ValueError):
    """A parameter lies outside its physical domain."""


class InvalidStateError(UncollapseError, ValueError):
    """A state vector or density matrix is malformed (zero norm, not Hermitian, ...)."""


class ImpossibleOutcomeError(UncollapseError):
    """A selected measurement outcome has (numerically) zero probability."""


class ImpossibleSelectionError(ImpossibleOutcomeError):
    """The post-selected protocol run has zero total weight."""


class InfeasibleMatchingError(UncollapseError):
    """No second-measurement strength in [0, 1] satisfies the matching condition."""


class InfeasibleTargetError(UncollapseError):
    """No second-measurement strength reaches the requested selection probability."""


class TomographyError(UncollapseError):
    """Linear-inversion process tomography could not be carried out."""


class EmptySelectionError(UncollapseError):
    """A Monte Carlo run kept no trajectories."""

    def __init__(self, message, n_total=0):
        super().__init__(message)
        self.n_total = n_total
        self.P_f_hat = 0.0
