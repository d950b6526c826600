"""Exception hierarchy shared by the whole pipeline.

Every error carries a short machine-parsable ``category`` used by the CLI
for its one-line error reports and exit status.
"""


class MmGestureError(Exception):
    category = "internal"


class InvalidArgumentError(MmGestureError):
    category = "invalid-argument"


class OutOfRangeError(MmGestureError):
    category = "out-of-range"


class ShapeError(MmGestureError):
    category = "shape"


class NoSignalError(MmGestureError):
    category = "no-signal"


class EmptyGestureError(MmGestureError):
    category = "empty-gesture"


class CsvFormatError(MmGestureError):
    """Malformed CSV input; message names the offending line."""

    category = "parse"


class ManifestError(MmGestureError):
    category = "manifest"


class NumericsError(MmGestureError):
    """NaN/Inf appeared where finite values are required."""

    category = "numerics"


class DivergenceError(MmGestureError):
    """Training loss became non-finite; message names the epoch."""

    category = "divergence"
