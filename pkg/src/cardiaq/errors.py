"""Exception types raised across the package.

Every error deliberately raised by cardiaq derives from CardiaqError so
callers (and the CLI) can distinguish data problems from genuine bugs.
"""


class CardiaqError(Exception):
    """Base class for all cardiaq errors."""


class InvalidArgumentError(CardiaqError, ValueError):
    """An argument violates a documented precondition."""


# --- volume file ingestion ---------------------------------------------------

class VolumeFormatError(CardiaqError):
    """Volume file bytes do not follow the supported format subset."""


class UnsupportedDatatypeError(VolumeFormatError):
    """Header declares a voxel datatype outside the supported set."""


class UnsupportedRankError(VolumeFormatError):
    """Header declares a dimensionality other than 3."""


class InvalidLabelError(VolumeFormatError):
    """Payload contains a value that is not a valid tissue-class code."""


# --- case metadata -----------------------------------------------------------

class MetadataError(CardiaqError):
    """Case metadata text is malformed."""


class MissingFieldError(MetadataError):
    """A required metadata key is absent."""


class MetadataParseError(MetadataError):
    """A metadata value cannot be parsed or violates an invariant."""


class UnknownClassError(MetadataError):
    """Metadata names a disease group outside the known set."""


class InconsistentCaseError(CardiaqError):
    """Volumes of one case disagree in dimensions or spacing."""


class InvalidSpecError(CardiaqError):
    """A phantom specification cannot be rasterized within its grid."""


# --- geometry and metrics ----------------------------------------------------

class EmptySliceError(CardiaqError):
    """Slice contains no myocardium; skipped upstream."""


class NoInnerContourError(CardiaqError):
    """Myocardium present but no inner contour can be formed."""


class NoContourError(CardiaqError):
    """A contour set needed for distance computation is empty."""


class NoMyocardiumError(CardiaqError):
    """No slice of the case yielded a usable myocardium contour."""


class EmptySurfaceError(CardiaqError):
    """Surface extraction or a surface metric received an empty mask."""


# --- feature assembly and learning -------------------------------------------

class FeatureUndefinedError(CardiaqError):
    """A feature cannot be computed for this case (case is quarantined)."""


class SchemaMismatchError(CardiaqError):
    """Feature schema does not match what a model or params expect."""


class DegenerateTrainingError(CardiaqError):
    """Training data lacks the class diversity needed to fit a model."""


class ConvergenceError(CardiaqError):
    """An iterative solver did not reach tolerance within its cap."""


class TrainingDivergedError(CardiaqError):
    """Training produced non-finite loss."""


class ModelFormatError(CardiaqError):
    """A serialized model cannot be loaded."""


class UnsupportedVersionError(ModelFormatError):
    """Serialized model declares an unknown format version."""


class IntegrityError(ModelFormatError):
    """Serialized model fails its checksum."""


class ConfigError(CardiaqError):
    """Pipeline configuration is invalid."""
