"""Exception hierarchy shared by every sealmark module."""


class SealmarkError(Exception):
    pass


class IoError(SealmarkError, OSError):
    pass


class UnsupportedFormat(SealmarkError):
    pass


class CorruptFile(SealmarkError):
    pass


class ImageTooSmall(SealmarkError, ValueError):
    pass


class InvalidKernelSpec(SealmarkError, ValueError):
    pass


class KernelLargerThanImage(SealmarkError, ValueError):
    pass


class PlaneTooSmall(SealmarkError, ValueError):
    pass


class NonDivisibleBlock(SealmarkError, ValueError):
    pass


class InvalidDelta(SealmarkError, ValueError):
    pass


class DimensionMismatch(SealmarkError, ValueError):
    pass


class NotPowerOfTwo(SealmarkError, ValueError):
    pass


class TooManyLevels(SealmarkError, ValueError):
    pass


class InvalidSize(SealmarkError, ValueError):
    pass


class PayloadSizeMismatch(SealmarkError, ValueError):
    pass


class InvalidGamma(SealmarkError, ValueError):
    pass


class ConstructionFailure(SealmarkError):
    pass


class LengthMismatch(SealmarkError, ValueError):
    pass


class LevelOverflow(SealmarkError, ValueError):
    pass


class BadKey(SealmarkError, ValueError):
    pass


class MalformedSignature(SealmarkError, ValueError):
    pass


class EmbedQualityBelowFloor(SealmarkError):
    pass


class EmbedSelfCheckFailed(SealmarkError):
    pass


class CodecUnavailable(SealmarkError):
    pass


class RegionTooLarge(SealmarkError, ValueError):
    pass


class EmptyCorpus(SealmarkError, ValueError):
    pass


class ConfigError(SealmarkError, ValueError):
    pass
