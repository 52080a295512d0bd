"""Exception types shared across the package."""


class BmuiError(Exception):
    """Base class for package-specific failures."""


class UnsupportedDownsampleError(BmuiError):
    """Resampling below the source rate is not supported."""


class InvalidSessionError(BmuiError):
    """A session violates its structural invariants."""


class CorruptSessionError(BmuiError):
    """Stored session files disagree with their manifest."""


class UnsupportedVersionError(BmuiError):
    """A stored artifact declares a format version we do not read."""


class CorruptModelError(BmuiError):
    """Model file is truncated or inconsistent with its header."""


class InsufficientDataError(BmuiError):
    """Not enough samples/trials/classes to run the operation."""


class UndefinedCorrelationError(BmuiError):
    """Correlation undefined because one input has zero rank variance."""


class DegenerateSampleError(BmuiError):
    """t-test sample has zero variance."""


class CalibrationError(BmuiError):
    """Rest and effort envelope distributions are not separable."""


class SignalTooShortError(BmuiError):
    """Signal shorter than the edge padding required by the filter."""
