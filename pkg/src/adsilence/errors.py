"""Exception hierarchy.

Each error carries the CLI exit code of its failure class so that scripts can
branch on it: 2 input/format, 3 insufficient data, 4 internal invariant.
"""


class AdSilenceError(Exception):
    exit_code = 4
    category = "internal"


class InputError(AdSilenceError):
    exit_code = 2
    category = "input"


class UnsupportedFormat(InputError):
    pass


class CorruptFile(InputError):
    pass


class ModelFormatError(InputError):
    pass


class AnnotationFormatError(InputError):
    pass


class AnnotationInconsistent(InputError):
    pass


class ConfigInvalid(InputError):
    pass


class InsufficientData(AdSilenceError):
    exit_code = 3
    category = "insufficient-data"


class EmptySignal(InsufficientData):
    pass


class EmptyWindow(InsufficientData):
    pass


class InvariantError(AdSilenceError):
    exit_code = 4
    category = "invariant"


class AnchorOutOfBounds(InvariantError):
    pass


class RegionOutOfBounds(InvariantError):
    pass


class LengthMismatch(InvariantError):
    pass


class DegenerateLabels(UserWarning):
    """Every training label is identical; the fitted model is a constant."""
