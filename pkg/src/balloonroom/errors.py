"""Exception types shared across the engine."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""


class InvalidTitle(EngineError):
    """Topic title is empty or whitespace-only."""


class TimeInversion(EngineError):
    """A query time precedes the creation time it is measured against."""


class ConfigError(EngineError):
    """Room configuration violates one of its invariants."""


class ParseFailure(EngineError):
    """Provider response does not match the strict wire format."""


class ProviderError(EngineError):
    """The language-model provider failed or returned nothing usable."""


class IllegalTransition(EngineError):
    """Session operation attempted in a phase that does not allow it."""


class UnknownBalloon(EngineError):
    """Referenced balloon id does not exist in the layout."""


class EmptyRecording(EngineError):
    """Playback requested but the recording captured no segments."""


class PersistenceError(EngineError):
    """Session file is corrupt or unsupported.

    ``field_path`` names the offending field (e.g. ``events[3].kind``).
    """

    def __init__(self, message: str, field_path: str | None = None):
        super().__init__(message if field_path is None else f"{message} (at {field_path})")
        self.field_path = field_path
