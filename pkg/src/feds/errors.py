"""Exception hierarchy shared by every module of the package."""


class FedsError(Exception):
    """Base class for all package errors."""


class ConfigError(FedsError, ValueError):
    """Bad command-line or pipeline configuration."""


class InvalidSide(FedsError, ValueError):
    pass


class LengthMismatch(FedsError, ValueError):
    pass


class MissingChunk(FedsError, ValueError):
    pass


class RangeViolation(FedsError, ValueError):
    """A value does not fit the bit width or certified range it is stored in."""

    def __init__(self, value, width, detail=""):
        self.value = value
        self.width = width
        msg = f"value {value} does not fit {width}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class OddLength(FedsError, ValueError):
    pass


class ShapeMismatch(FedsError, ValueError):
    pass


class GeometryMismatch(ShapeMismatch):
    pass


class InvalidIv(FedsError, ValueError):
    pass


class IntegrityFailure(FedsError):
    pass


class LikelyWrongKey(FedsError):
    pass


class FormatError(FedsError, ValueError):
    """A fragment, share or map file could not be parsed."""


# sharing

class DivideByZero(FedsError, ZeroDivisionError):
    pass


class MissingShare(FedsError):
    pass


class InsufficientShares(FedsError):
    pass


class DuplicateIndex(FedsError, ValueError):
    pass


class CanaryMismatch(IntegrityFailure):
    pass


# dispersion

class InsufficientNodes(FedsError):
    pass


class NoTrustedNode(FedsError):
    pass


class NodeWriteFailure(FedsError, OSError):
    pass


class DigestMismatch(IntegrityFailure):
    pass


class Unrecoverable(FedsError):
    pass


class MapIntegrityError(IntegrityFailure):
    pass


# analysis

class EmptyInput(FedsError, ValueError):
    pass


class DegenerateVariance(FedsError, ValueError):
    pass
