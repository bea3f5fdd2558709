"""Exception hierarchy shared by all pctof modules."""


class PCToFError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PCToFError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class ModelValidityError(PCToFError, ValueError):
    """The narrow-pulse model is evaluated outside its range of validity."""


class UnsupportedCodingError(PCToFError, ValueError):
    """The requested operation has no implementation for this signal pair."""


class IntegrationError(PCToFError, RuntimeError):
    """Numerical integration did not reach the requested tolerance."""


class FitError(PCToFError, RuntimeError):
    """A monotone response could not be fitted."""


class DegenerateEdgeError(FitError):
    """The sampled curve has no rising edge to fit."""


class OutOfSensitiveRangeError(PCToFError, ValueError):
    """A raw-fraction value falls outside a pixel's calibrated response."""


class DegenerateSweepError(PCToFError, ValueError):
    """A calibration sweep lacks the plateau/edge structure required."""


class CalibrationError(PCToFError, RuntimeError):
    """Calibration failed, e.g. too many pixels could not be calibrated."""

    def __init__(self, message, invalid_fraction=None):
        super().__init__(message)
        self.invalid_fraction = invalid_fraction


class CompatibilityError(PCToFError, ValueError):
    """A calibration table does not match the frames it is applied to."""


class FormatError(PCToFError, ValueError):
    """A file does not follow the documented on-disk layout."""


class EmptyMetricError(PCToFError, ValueError):
    """A metric was requested over an empty set of valid pixels."""


class ConfigError(PCToFError, ValueError):
    """A run configuration is missing fields or holds invalid values."""
