"""Exception hierarchy shared by every stage of the toolkit."""


class DbcrError(Exception):
    """Base class for all toolkit errors."""


class DecodeError(DbcrError):
    """Raised when raster bytes cannot be decoded.

    ``offset`` is the byte position where decoding failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DimensionError(DbcrError, ValueError):
    """Grid geometry is too small or inconsistent for the requested operation."""


class FusionError(DimensionError):
    pass


class ComparabilityError(DbcrError):
    """Vectors or indexes were produced under different descriptor configurations."""


class IngestionError(DbcrError):
    def __init__(self, message, offenders=()):
        self.offenders = list(offenders)
        if self.offenders:
            shown = ", ".join(str(p) for p in self.offenders[:10])
            more = "" if len(self.offenders) <= 10 else f" (+{len(self.offenders) - 10} more)"
            message = f"{message}: {shown}{more}"
        super().__init__(message)


class IndexFormatError(DbcrError):
    """Base class for index file load failures."""


class MagicError(IndexFormatError):
    pass


class VersionError(IndexFormatError):
    pass


class TruncatedIndexError(IndexFormatError):
    pass


class FingerprintError(IndexFormatError, ComparabilityError):
    pass


class ReportError(DbcrError):
    pass
