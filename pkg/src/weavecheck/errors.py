"""Exception types shared across the package.

Parameter misuse raises plain ValueError; the classes here mark problems
with input data or trained models, which the CLI maps to exit code 2.
"""


class WeavecheckError(Exception):
    """Base class for data/model errors raised by this package."""


class DataFormatError(WeavecheckError):
    """An input file is unreadable or not in a supported format."""


class SegmentationError(WeavecheckError):
    """The lattice structure of an image could not be recovered.

    Carries the projection curves that were being analysed so callers can
    dump them for diagnosis.
    """

    def __init__(self, message, curves=None):
        super().__init__(message)
        self.curves = dict(curves) if curves else {}


class ClassificationError(WeavecheckError):
    """A sub-region's primitive row ordering matches no known template."""


class CalibrationError(WeavecheckError):
    """Training data is insufficient or degenerate for calibration."""


class ModelError(WeavecheckError):
    """A trained model is missing, malformed, or does not cover the input."""
