"""Exception types raised across the package."""


class IntentLabError(Exception):
    """Base class for all package errors."""


class NonPositiveDuration(IntentLabError, ValueError):
    pass


class MissingAnnotation(IntentLabError, ValueError):
    pass


class VideoTooShort(IntentLabError, ValueError):
    def __init__(self, message, video_id=None):
        super().__init__(message)
        self.video_id = video_id


class HorizonNotMultipleOfStride(IntentLabError, ValueError):
    pass


class InvalidConfig(IntentLabError, ValueError):
    pass


class ShapeMismatch(IntentLabError, ValueError):
    pass


class NonFiniteLoss(IntentLabError, FloatingPointError):
    pass


class ZeroVector(IntentLabError, ValueError):
    pass


class NonPositiveTemperature(IntentLabError, ValueError):
    pass


class EmptyNegativeSet(IntentLabError, ValueError):
    pass


class DegenerateIndices(IntentLabError, ValueError):
    pass


class MissingClass(IntentLabError, ValueError):
    pass


class NoValidPairs(IntentLabError, ValueError):
    pass


class DatasetNotFound(IntentLabError, FileNotFoundError):
    pass


class CheckpointNotFound(IntentLabError, FileNotFoundError):
    pass


class NoMetricsFound(IntentLabError, FileNotFoundError):
    pass


class OutputDirError(IntentLabError, OSError):
    pass
