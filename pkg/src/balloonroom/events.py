"""Session event vocabulary.

Every state change in a session is recorded as one event in an append-only
log; the log alone is enough to rebuild the topic store and the balloon
layout. Operations below the session produce unsequenced ``EventDraft``s;
the session log stamps them with ``seq`` and ``t`` on commit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class EventKind(str, Enum):
    SESSION_STARTED = "SessionStarted"
    TIMER_STARTED = "TimerStarted"
    TRANSCRIPT_APPENDED = "TranscriptAppended"
    BALLOON_CREATED = "BalloonCreated"
    BALLOON_GROWN = "BalloonGrown"
    BALLOON_MOVED = "BalloonMoved"
    BALLOON_DELETED = "BalloonDeleted"
    TOPIC_RENAMED = "TopicRenamed"
    TOPICS_MERGED = "TopicsMerged"
    SUGGESTION_ADDED = "SuggestionAdded"
    ORGANIZE_APPLIED = "OrganizeApplied"
    PLAYBACK_STARTED = "PlaybackStarted"
    PLAYBACK_FINISHED = "PlaybackFinished"
    WARNING = "Warning"


@dataclass(frozen=True)
class EventDraft:
    """An event produced by an operation, not yet stamped into the log."""

    kind: EventKind
    payload: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SessionEvent:
    """One committed entry of the append-only session log."""

    seq: int
    t: float
    kind: EventKind
    payload: dict[str, Any]

    def to_json(self) -> dict:
        return {"seq": self.seq, "t": self.t, "kind": self.kind.value, "payload": self.payload}

    @classmethod
    def from_json(cls, doc: dict) -> "SessionEvent":
        return cls(
            seq=doc["seq"], t=doc["t"], kind=EventKind(doc["kind"]), payload=doc["payload"]
        )


def warning(code: str, message: str, **extra: Any) -> EventDraft:
    payload = {"code": code, "message": message}
    payload.update(extra)
    return EventDraft(EventKind.WARNING, payload)
