"""Exception hierarchy.  Every error raised on purpose derives from MsnError."""


class MsnError(Exception):
    pass


class DatasetError(MsnError, ValueError):
    pass


class BadMagic(DatasetError):
    pass


class DimensionMismatch(DatasetError):
    pass


class TruncatedFile(DatasetError):
    pass


class BadLabel(DatasetError):
    pass


class NonFiniteWeight(MsnError, ValueError):
    pass


class NonPositiveInput(MsnError, ValueError):
    pass


class NonPositiveFrequency(MsnError, ValueError):
    pass


class NegativePower(MsnError, ValueError):
    pass


class LengthMismatch(MsnError, ValueError):
    pass


class ShapeMismatch(MsnError, ValueError):
    pass


class DivergedLoss(MsnError, FloatingPointError):
    pass


class InfeasibleAnchors(MsnError, ValueError):
    pass


class MissingCheckpoint(MsnError, FileNotFoundError):
    pass


class ConfigError(MsnError, ValueError):
    pass


class FormatError(MsnError, ValueError):
    """Unreadable or wrong-version checkpoint / quantized-model container."""
