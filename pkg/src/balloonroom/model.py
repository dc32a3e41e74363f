"""Shared domain types and the closed-form balloon geometry rules.

Coordinate frame (frozen for the whole engine):
    x: east, in [0, width]
    y: up, in [0, height], floor at y = 0
    z: north, in [0, depth]
The room is an axis-aligned box; the user stands inside it.

Two rules tie balloon geometry to speech:
    radius encodes word volume (linear, capped at ``w_cap`` words),
    height encodes age (spawn at ``h_spawn``, drift up to ``h_max``).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from enum import Enum
from math import sqrt

from .errors import ConfigError, InvalidTitle, TimeInversion

Vec3 = tuple[float, float, float]

DEFAULT_ALPHA = 0.4
DEFAULT_EYE_HEIGHT = 1.6


class SegmentSource(str, Enum):
    LIVE = "live"
    RECORDING = "recording"
    FILE = "file"


class TopicOrigin(str, Enum):
    EXTRACTED = "extracted"
    VOICE_COMMAND = "voice_command"
    SUGGESTED = "suggested"


def count_words(text: str) -> int:
    """Whitespace-delimited word count."""
    return len(text.split())


def normalize_topic_key(title: str) -> str:
    """Identity rule for topics: trim, collapse internal whitespace, case-fold.

    Deliberately no stemming or plural folding: spelling variants stay
    distinct topics that the user merges by voice command.
    """
    collapsed = " ".join(title.split())
    if not collapsed:
        raise InvalidTitle("topic title is empty or whitespace-only")
    return collapsed.casefold()


@dataclass(frozen=True)
class TranscriptSegment:
    """One recognized sentence-level utterance with timing."""

    id: str
    text: str
    t_start: float
    t_end: float
    source: SegmentSource = SegmentSource.LIVE

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("segment text must be non-empty")
        if not 0 <= self.t_start <= self.t_end:
            raise ValueError(f"segment times invalid: [{self.t_start}, {self.t_end}]")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "source": self.source.value,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TranscriptSegment":
        return cls(
            id=doc["id"],
            text=doc["text"],
            t_start=doc["t_start"],
            t_end=doc["t_end"],
            source=SegmentSource(doc["source"]),
        )


@dataclass
class Topic:
    """A deduplicated key topic with its attached source sentences.

    ``sentences`` holds (segment_id, sentence) pairs in append order;
    ``word_count`` is always derived from them, never stored.
    """

    key: str
    title: str
    created_at: float
    origin: TopicOrigin
    sentences: list[tuple[str, str]] = field(default_factory=list)

    @property
    def word_count(self) -> int:
        return sum(count_words(text) for _, text in self.sentences)

    def sentence_texts(self) -> list[str]:
        return [text for _, text in self.sentences]


@dataclass
class Balloon:
    """The spatial embodiment of one topic; keyed by the topic it renders."""

    topic_key: str
    center: Vec3
    radius: float
    created_at: float
    pinned: bool = False
    alpha: float = DEFAULT_ALPHA


@dataclass(frozen=True)
class GazeState:
    """User head position and unit forward direction in the room frame."""

    origin: Vec3
    direction: Vec3

    def __post_init__(self):
        n = sqrt(sum(c * c for c in self.direction))
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"gaze direction must be unit length, got |d| = {n}")

    @classmethod
    def looking(cls, origin: Vec3, direction: Vec3) -> "GazeState":
        """Build a gaze state, normalizing ``direction`` first."""
        n = sqrt(sum(c * c for c in direction))
        if n < 1e-12:
            raise ValueError("gaze direction must be non-zero")
        return cls(origin, (direction[0] / n, direction[1] / n, direction[2] / n))


@dataclass(frozen=True)
class RoomConfig:
    """Room geometry and the numeric knobs of the balloon rules.

    The 300-word growth cap and the fixed spawn height are behavioral
    requirements; the remaining defaults were picked for a comfortable
    human-scale room and can all be overridden.
    """

    width: float = 6.0
    depth: float = 6.0
    height: float = 3.5
    h_spawn: float = 1.4
    h_max: float = 2.6
    drift_rate: float = 0.005
    r_min: float = 0.25
    r_max: float = 0.75
    w_cap: int = 300
    fov_half_angle: float = 40.0
    spawn_dist_min: float = 1.0
    spawn_dist_max: float = 2.5
    wall_offset: float = 0.3
    rng_seed: int = 0

    def validate(self) -> "RoomConfig":
        if min(self.width, self.depth, self.height) <= 0:
            raise ConfigError("room dimensions must be positive")
        if not 0 < self.h_spawn < self.h_max < self.height:
            raise ConfigError("need 0 < h_spawn < h_max < height")
        if not 0 < self.r_min < self.r_max:
            raise ConfigError("need 0 < r_min < r_max")
        if self.w_cap <= 0:
            raise ConfigError("w_cap must be positive")
        if not 0 < self.spawn_dist_min < self.spawn_dist_max:
            raise ConfigError("need 0 < spawn_dist_min < spawn_dist_max")
        if self.fov_half_angle < 0 or self.fov_half_angle > 180:
            raise ConfigError("fov_half_angle must be in [0, 180] degrees")
        if self.wall_offset < 0:
            raise ConfigError("wall_offset must be non-negative")
        # Containment: a full-grown balloon must fit under the drift ceiling
        # and above the floor at spawn height.
        if self.h_max + self.r_max > self.height:
            raise ConfigError("h_max + r_max must not exceed the room height")
        if self.h_spawn < self.r_max:
            raise ConfigError("h_spawn must be at least r_max to clear the floor")
        return self

    def default_gaze(self) -> GazeState:
        return GazeState(
            (self.width / 2, DEFAULT_EYE_HEIGHT, self.depth / 2), (0.0, 0.0, 1.0)
        )

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json(cls, doc: dict) -> "RoomConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc).validate()


def scale_radius(word_count: int, cfg: RoomConfig) -> float:
    """Balloon radius for a topic's word count: linear then flat at the cap."""
    if word_count < 0:
        raise ValueError("word_count must be non-negative")
    filled = min(word_count, cfg.w_cap) / cfg.w_cap
    return cfg.r_min + (cfg.r_max - cfg.r_min) * filled


def height_at(created_at: float, now: float, cfg: RoomConfig) -> float:
    """Balloon center height ``now`` seconds into the session.

    Spawns at ``h_spawn`` and drifts up linearly, clamped at ``h_max``;
    older balloons therefore sit at or above younger ones.
    """
    if now < created_at:
        raise TimeInversion(f"now={now} precedes created_at={created_at}")
    return min(cfg.h_spawn + cfg.drift_rate * (now - created_at), cfg.h_max)


class TopicStore:
    """Insertion-ordered set of topics, unique by normalized key."""

    def __init__(self):
        self._topics: dict[str, Topic] = {}

    def __contains__(self, key: str) -> bool:
        return key in self._topics

    def __len__(self) -> int:
        return len(self._topics)

    def keys(self) -> list[str]:
        return list(self._topics)

    def titles(self) -> list[str]:
        return [t.title for t in self._topics.values()]

    def topics(self) -> list[Topic]:
        return list(self._topics.values())

    def get(self, key: str) -> Topic | None:
        return self._topics.get(key)

    def create(
        self,
        title: str,
        created_at: float,
        origin: TopicOrigin,
        sentences: list[tuple[str, str]] | None = None,
    ) -> Topic:
        key = normalize_topic_key(title)
        if key in self._topics:
            raise ValueError(f"topic {key!r} already exists")
        topic = Topic(
            key=key,
            title=" ".join(title.split()),
            created_at=created_at,
            origin=origin,
            sentences=list(sentences or []),
        )
        self._topics[key] = topic
        return topic

    def append_sentences(self, key: str, pairs: list[tuple[str, str]]) -> Topic:
        topic = self._topics[key]
        topic.sentences.extend(pairs)
        return topic

    def rename(self, old_key: str, new_title: str) -> Topic:
        new_key = normalize_topic_key(new_title)
        topic = self._topics[old_key]
        topic.key = new_key
        topic.title = " ".join(new_title.split())
        # Rebuild to keep insertion order stable under the new key.
        self._topics = {
            (new_key if k == old_key else k): v for k, v in self._topics.items()
        }
        return topic

    def delete(self, key: str) -> Topic:
        return self._topics.pop(key)

    def to_json(self) -> list[dict]:
        return [
            {
                "key": t.key,
                "title": t.title,
                "created_at": t.created_at,
                "origin": t.origin.value,
                "sentences": [[sid, text] for sid, text in t.sentences],
            }
            for t in self._topics.values()
        ]

    @classmethod
    def from_json(cls, docs: list[dict]) -> "TopicStore":
        store = cls()
        for doc in docs:
            topic = Topic(
                key=doc["key"],
                title=doc["title"],
                created_at=doc["created_at"],
                origin=TopicOrigin(doc["origin"]),
                sentences=[(sid, text) for sid, text in doc["sentences"]],
            )
            store._topics[topic.key] = topic
        return store
