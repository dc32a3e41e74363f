"""Real-time engine that turns spoken ideas into an interactive balloon scene."""

from .errors import (
    ConfigError,
    EmptyRecording,
    EngineError,
    IllegalTransition,
    InvalidTitle,
    ParseFailure,
    PersistenceError,
    ProviderError,
    TimeInversion,
    UnknownBalloon,
)
from .events import EventKind, SessionEvent
from .model import (
    Balloon,
    GazeState,
    RoomConfig,
    Topic,
    TopicOrigin,
    TopicStore,
    TranscriptSegment,
    height_at,
    normalize_topic_key,
    scale_radius,
)
from .session import Engine, FakeClock, Mode, Phase, WallClock, rebuild

__version__ = "0.1.0"

__all__ = [
    "Balloon",
    "ConfigError",
    "EmptyRecording",
    "Engine",
    "EngineError",
    "EventKind",
    "FakeClock",
    "GazeState",
    "IllegalTransition",
    "InvalidTitle",
    "Mode",
    "ParseFailure",
    "PersistenceError",
    "Phase",
    "ProviderError",
    "RoomConfig",
    "SessionEvent",
    "TimeInversion",
    "Topic",
    "TopicOrigin",
    "TopicStore",
    "TranscriptSegment",
    "UnknownBalloon",
    "WallClock",
    "height_at",
    "normalize_topic_key",
    "rebuild",
    "scale_radius",
    "__version__",
]
