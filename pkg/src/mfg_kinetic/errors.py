"""Exception types shared across the package."""


class MFGKineticError(Exception):
    """Base class for all package-specific errors."""


class NonSimplexInitial(MFGKineticError):
    """Initial law fails the probability-simplex invariants."""


class NegativeRate(MFGKineticError):
    """A sampled transition rate is negative (or exceeds the bound M)."""


class DegenerateHorizon(MFGKineticError):
    """Time horizon T is not strictly positive."""


class OutOfRange(MFGKineticError):
    """Time argument outside [0, T]."""


class NonFiniteValue(MFGKineticError):
    """Overflow or NaN encountered during an ODE integration."""


class MassLoss(MFGKineticError):
    """Cumulative renormalization of the forward flow exceeded its budget."""


class NegativeMass(MFGKineticError):
    """A forward-flow component went below the tolerated negative slack."""


class FamilyUnsupported(MFGKineticError):
    """Operation is only defined for one of the model families."""


class RateDependsOnMeasure(MFGKineticError):
    """Rates depend on p, so the monotonicity theorem does not apply."""


class StateSpaceTooLarge(MFGKineticError):
    """Joint state count exceeds the configured enumeration cap."""


class RateExceedsBound(MFGKineticError):
    """A simulated rate exceeded M, violating the thinning envelope."""


class InsufficientData(MFGKineticError):
    """Not enough sample points for the requested fit."""


class NotConverged(MFGKineticError):
    """Fixed-point iteration hit max_iter (carries the best iterate)."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution
