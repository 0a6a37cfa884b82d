"""Exception types shared across the calibration library."""


class CalibrationError(Exception):
    """Base class for all calibration failures."""


class DegenerateData(CalibrationError):
    """Response data cannot identify the parameters (all-same responses,
    too few distinct trait levels, or no data at all)."""


class NonConvergence(CalibrationError):
    """The likelihood maximizer did not converge within its iteration
    budget. The best iterate found is attached as ``result``."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SingularInformation(CalibrationError):
    """The observed information matrix is singular or not positive
    definite where an inverse is required. The estimate in effect at the
    failure is attached as ``gamma``."""

    def __init__(self, message, gamma=None):
        super().__init__(message)
        self.gamma = gamma


class ConfigError(CalibrationError):
    """A study configuration file or value is invalid."""
