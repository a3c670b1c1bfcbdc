"""Exception hierarchy.

Every error carries a short machine-readable ``category`` string which the
command-line front end prints on stderr.
"""


class BowlerHatError(Exception):
    category = "error"

    def __init__(self, message="", category=None):
        super().__init__(message)
        if category is not None:
            self.category = category


class VolumeFormatError(BowlerHatError):
    category = "volume_format"


class MissingRawError(VolumeFormatError):
    category = "missing_raw"


class RawSizeError(VolumeFormatError):
    category = "raw_size_mismatch"


class UnknownDtypeError(VolumeFormatError):
    category = "unknown_dtype"


class InvalidDimsError(VolumeFormatError):
    category = "invalid_dims"


class InvalidParameterError(BowlerHatError, ValueError):
    category = "invalid_parameter"


class UnknownMethodError(InvalidParameterError):
    category = "unknown_method"


class UsageError(BowlerHatError):
    category = "usage"


class ShapeMismatchError(BowlerHatError, ValueError):
    category = "dims_mismatch"


class DegenerateTruthError(BowlerHatError, ValueError):
    category = "degenerate_truth"


class PhantomSpecError(BowlerHatError, ValueError):
    category = "phantom_spec"


class GeometryError(PhantomSpecError):
    category = "geometry_out_of_bounds"


class NoPeakError(BowlerHatError, ValueError):
    category = "no_peak"


class DegenerateResponseWarning(UserWarning):
    """Raised as a warning when an enhancer has nothing to normalise by."""
