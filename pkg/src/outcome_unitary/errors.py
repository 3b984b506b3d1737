"""Exception hierarchy shared by every module of the package."""


class OutcomeUnitaryError(ValueError):
    """Base class for all errors raised by this package."""


class FactorOrderError(OutcomeUnitaryError):
    """Tensor factors were composed out of the S, A, E order."""


class InvalidStateError(OutcomeUnitaryError):
    """An array failed the density-matrix, pure-state or projector checks."""


class DegenerateProjectionError(OutcomeUnitaryError):
    """A projector has (numerically) zero weight on the state."""


class InfeasibleConstructionError(OutcomeUnitaryError):
    """Dimensions leave no room for orthonormal environment images."""


class InadmissibleStateError(OutcomeUnitaryError):
    """The system state has no weight on the outcome eigenstate."""


class CalibrationError(OutcomeUnitaryError):
    """Bisection for the perturbation angle did not converge."""


class RecoveryError(OutcomeUnitaryError):
    """The final environment carries too little weight in the recovery span."""


class NotUnitaryError(OutcomeUnitaryError):
    """A matrix expected to be unitary is not."""


class ConfigError(OutcomeUnitaryError):
    """A scenario configuration could not be parsed or validated."""
