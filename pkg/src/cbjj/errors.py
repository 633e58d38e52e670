"""Exception and warning classes."""


class CbjjError(Exception):
    """Base class for all package errors."""


class DomainError(CbjjError, ValueError):
    """Argument outside the physical domain (e.g. bias >= critical current)."""


class ConfigError(CbjjError, ValueError):
    pass


class IntegrationError(CbjjError, RuntimeError):
    """The phase integrator produced an unphysical trajectory."""


class InsufficientEscapesError(CbjjError, RuntimeError):
    pass


class RateOverflowError(CbjjError, RuntimeError):
    """Dark rate too large for the protocol sampler."""


class BudgetExceededError(CbjjError, RuntimeError):
    pass


class FitError(CbjjError, RuntimeError):
    """Fit failed to converge or is not usable."""


class DegenerateHistogramError(FitError):
    pass


class InsufficientDataError(FitError):
    pass


class MisalignedBinError(FitError):
    pass


class ValidityWarning(UserWarning):
    """A model is evaluated outside its regime of validity."""


class IllConditionedWarning(UserWarning):
    pass


class ClampWarning(UserWarning):
    pass
