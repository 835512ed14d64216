"""Shared exception types."""


class BirdscapeError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(BirdscapeError):
    """An argument violates a documented precondition."""


class TooShortError(BirdscapeError):
    """Audio is shorter than one analysis window."""


class MalformedAudioError(BirdscapeError):
    """Payload does not decode as a supported WAV file."""


class UnknownSpeciesError(BirdscapeError):
    """Species index is not in the synthetic registry."""


class RecognitionUnavailableError(BirdscapeError):
    """Remote recognition failed and fallback is disabled."""


class AccessDeniedError(BirdscapeError):
    """Caller does not hold the badge that unlocks this resource."""


class QuestError(BirdscapeError):
    """Quest is locked, unknown, or already active."""
