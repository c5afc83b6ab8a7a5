"""Exception types shared across the pipeline."""


class AvatarIdError(Exception):
    """Base class for all library errors."""


class FormatError(AvatarIdError):
    """Unsupported or corrupt file content (image codec, manifest schema)."""


class DetectError(AvatarIdError):
    """Eye localization could not find two candidate blobs."""


class DegenerateError(AvatarIdError):
    """Geometry too collapsed to work with (e.g. coincident eyes)."""


class ConfigError(AvatarIdError):
    """Invalid pipeline configuration (grid, weights, flags)."""


class DimensionError(AvatarIdError):
    """Vector/template shape mismatch between the two sides of a comparison."""


class ProtocolError(AvatarIdError):
    """Manifest violates the gallery/probe protocol (e.g. missing set-A entry)."""


class EmptyGalleryError(AvatarIdError):
    """Identification requested against a gallery with no enrolled subjects."""


class UnknownSubjectError(AvatarIdError):
    """Verification claim against a subject id that is not enrolled."""
