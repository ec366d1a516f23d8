"""Exception hierarchy shared by all modules."""


class NeuralTokError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(NeuralTokError, ValueError):
    pass


class EmptyCorpusError(NeuralTokError, ValueError):
    pass


class EmptyInputError(NeuralTokError, ValueError):
    pass


class CorpusDecodeError(NeuralTokError, ValueError):
    def __init__(self, offset: int, reason: str = "invalid UTF-8"):
        super().__init__(f"{reason} at byte offset {offset}")
        self.offset = offset


class InvalidSegmentationError(NeuralTokError, ValueError):
    pass


class MalformedFileError(NeuralTokError, ValueError):
    pass


class VersionError(MalformedFileError):
    pass


class AlphabetError(NeuralTokError, ValueError):
    pass


class ShapeError(NeuralTokError, ValueError):
    pass


class StateError(NeuralTokError, RuntimeError):
    pass


class TrainingError(NeuralTokError, RuntimeError):
    """Raised when optimisation produces non-finite values."""
