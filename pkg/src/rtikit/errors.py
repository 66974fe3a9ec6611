"""Exception types shared by the pipeline stages.

Invalid arguments (wrong shapes, out-of-range parameters) raise the builtin
``ValueError``; everything domain-specific derives from :class:`RtiError` so
callers can distinguish "this frame/stage failed" from programming errors.
"""


class RtiError(Exception):
    """Base class for domain failures in the RTI pipeline."""


class SyncError(RtiError):
    """Audio/frame synchronization failed (silent track, no overlap...)."""


class MarkerError(RtiError):
    """Base for per-frame marker detection failures; callers skip the frame."""


class MarkerNotFoundError(MarkerError):
    """No marker candidate survived the detection pipeline."""


class AmbiguousMarkerError(MarkerError):
    """More than one plausible marker (or dot) was found."""


class DegenerateImageError(RtiError):
    """Image content defeats the operation (e.g. single-valued histogram)."""


class DegenerateGeometryError(RtiError):
    """Collinear points, collapsed quads, singular homographies and kin."""


class EmptyMlicError(RtiError):
    """No frame pair survived filtering; the collection would be empty."""


class SplitError(RtiError):
    """Train/test light split left no usable training lights."""


class DivergenceError(RtiError):
    """Training produced a non-finite loss."""


class ModelFormatError(RtiError):
    """Relight model file is malformed.

    ``offset`` is the byte position at which parsing failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset
