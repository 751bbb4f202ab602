"""Exception types shared across the package."""


class QsoptError(Exception):
    """Base class for all package errors."""


class DimensionError(QsoptError, ValueError):
    """A vector does not match the oracle or source dimension."""


class NonFiniteInputError(QsoptError, ValueError):
    """A query point contains NaN or infinity."""


class CapabilityError(QsoptError):
    """The oracle or source does not provide the requested channel."""


class ContractViolation(QsoptError, ValueError):
    """A mean-estimation call was made outside the estimator's contract."""


class ParameterDomainError(QsoptError, ValueError):
    """Algorithm parameters fall outside the range the method supports."""


class NumericDegeneracyError(QsoptError, ArithmeticError):
    """The ellipsoid shape matrix stopped being positive definite."""


class ConfigError(QsoptError):
    """Experiment configuration is malformed or unusable."""
