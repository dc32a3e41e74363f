"""Session state machine and append-only event log.

A session owns one topic store, one layout, one provider (behind a response
cache) and one clock. Every mutation funnels through this single writer and
is recorded as events; replaying the log from an empty state reconstructs
the exact topic store and balloon layout.

Two narrative modes share the machinery:
    interactive: speech is processed as it arrives (Idle -> Live);
    linear: speech is recorded first, then played back with balloons
            emerging at the recorded moments
            (Idle -> Recording -> Recorded -> Playing -> Done).

Provider responses are cached when first seen (during recording this means
a shadow run of the whole pipeline), so playback is offline-deterministic.
"""

from __future__ import annotations

import json
import random
import time
import uuid
from enum import Enum
from pathlib import Path
from typing import Protocol

from .commands import CommandKind, VoiceCommand, execute_command, parse_command
from .errors import (
    EmptyRecording,
    IllegalTransition,
    ParseFailure,
    PersistenceError,
    ProviderError,
)
from .events import EventDraft, EventKind, SessionEvent, warning
from .extractor import apply_extraction, build_prompt, expand_topic, parse_response
from .layout import Layout
from .model import (
    Balloon,
    GazeState,
    RoomConfig,
    SegmentSource,
    Topic,
    TopicOrigin,
    TopicStore,
    TranscriptSegment,
    Vec3,
    scale_radius,
)
from .providers import Provider, ProviderCache, ProviderRequest, RuleBasedProvider
from .segmenter import split_sentences

FORMAT_VERSION = 1


class Phase(str, Enum):
    IDLE = "Idle"
    LIVE = "Live"
    RECORDING = "Recording"
    RECORDED = "Recorded"
    PLAYING = "Playing"
    DONE = "Done"


class Mode(str, Enum):
    INTERACTIVE = "interactive"
    LINEAR = "linear"


_LEGAL_TRANSITIONS: dict[Phase, set[Phase]] = {
    Phase.IDLE: {Phase.LIVE, Phase.RECORDING},
    Phase.RECORDING: {Phase.RECORDED},
    Phase.RECORDED: {Phase.PLAYING},
    Phase.PLAYING: {Phase.DONE},
}


class Clock(Protocol):
    def now(self) -> float: ...
    def sleep(self, seconds: float) -> None: ...


class WallClock:
    """Monotonic seconds since construction (optionally offset)."""

    def __init__(self, initial: float = 0.0):
        self._t0 = time.monotonic() - initial

    def now(self) -> float:
        return time.monotonic() - self._t0

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class FakeClock:
    """Manual clock for deterministic tests and headless replay."""

    def __init__(self, start: float = 0.0):
        self._now = start

    def now(self) -> float:
        return self._now

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            self._now += seconds

    def advance_to(self, t: float) -> None:
        self._now = max(self._now, t)


class EventLog:
    """Append-only sequence of session events; seq strictly increasing."""

    def __init__(self):
        self.events: list[SessionEvent] = []
        self._next_seq = 1
        self._last_t = 0.0

    @property
    def last_seq(self) -> int:
        return self._next_seq - 1

    def append(self, kind: EventKind, payload: dict, t: float) -> SessionEvent:
        self._last_t = max(self._last_t, t)
        event = SessionEvent(seq=self._next_seq, t=self._last_t, kind=kind,
                             payload=dict(payload))
        self._next_seq += 1
        self.events.append(event)
        return event

    def commit(self, drafts: list[EventDraft], t: float) -> list[SessionEvent]:
        return [self.append(d.kind, d.payload, t) for d in drafts]

    def since(self, seq: int) -> list[SessionEvent]:
        if seq <= 0:
            return list(self.events)
        return [e for e in self.events if e.seq > seq]


class Engine:
    """One session: the single writer over topic store, layout and log."""

    def __init__(
        self,
        cfg: RoomConfig | None = None,
        provider: Provider | None = None,
        clock: Clock | None = None,
        session_id: str | None = None,
    ):
        self.cfg = (cfg or RoomConfig()).validate()
        self.provider: Provider = provider if provider is not None else RuleBasedProvider()
        self.clock: Clock = clock if clock is not None else WallClock()
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.cache = ProviderCache()
        self.topics = TopicStore()
        self.layout = Layout(self.cfg)
        self.log = EventLog()
        self.phase = Phase.IDLE
        self.mode: Mode | None = None
        self.add_target: str | None = None
        self._segment_counter = 0
        self._recording: list[tuple[float, TranscriptSegment]] = []
        self._recording_t0: float | None = None
        self._playback_rate = 1.0
        self._playback_index = 0
        self._playback_anchor = 0.0
        self._shadow: tuple[TopicStore, Layout] | None = None

    # -- phase machine -------------------------------------------------------

    def _transition(self, to: Phase) -> None:
        if to not in _LEGAL_TRANSITIONS.get(self.phase, set()):
            raise IllegalTransition(f"{self.phase.value} -> {to.value}")
        self.phase = to

    def start_session(self) -> list[SessionEvent]:
        """Begin the default interactive narrative (Idle -> Live)."""
        self._transition(Phase.LIVE)
        self.mode = Mode.INTERACTIVE
        return self.log.commit(
            [
                EventDraft(EventKind.SESSION_STARTED, {"mode": self.mode.value}),
                EventDraft(EventKind.TIMER_STARTED, {}),
            ],
            self.clock.now(),
        )

    def start_recording(self) -> list[SessionEvent]:
        """Begin the linear narrative by capturing speech (Idle -> Recording)."""
        self._transition(Phase.RECORDING)
        self.mode = Mode.LINEAR
        self._recording_t0 = self.clock.now()
        # Shadow pipeline state: runs every recorded segment through the real
        # extraction path (so provider responses land in the cache with the
        # exact prompts playback will build) without emitting any events.
        self._shadow = (TopicStore(), Layout(self.cfg, rng=random.Random(self.cfg.rng_seed)))
        return self.log.commit(
            [
                EventDraft(EventKind.SESSION_STARTED, {"mode": self.mode.value}),
                EventDraft(EventKind.TIMER_STARTED, {}),
            ],
            self.clock.now(),
        )

    def stop_recording(self) -> list[SessionEvent]:
        self._transition(Phase.RECORDED)
        self._shadow = None
        return []

    # -- segment intake --------------------------------------------------------

    def ingest_text(self, text: str, source: SegmentSource = SegmentSource.LIVE
                    ) -> list[SessionEvent]:
        """Split free text into sentence segments and route them per phase."""
        out: list[SessionEvent] = []
        recording = self.phase is Phase.RECORDING
        if recording and source is SegmentSource.LIVE:
            source = SegmentSource.RECORDING
        for sentence in split_sentences(text):
            now = self.clock.now()
            self._segment_counter += 1
            seg = TranscriptSegment(
                id=f"{'rec' if recording else 'live'}-{self._segment_counter}",
                text=sentence,
                t_start=now,
                t_end=now,
                source=source,
            )
            if self.phase is Phase.RECORDING:
                self.record_segment(seg)
            else:
                out.extend(self.handle_segment(seg))
        return out

    def handle_segment(self, seg: TranscriptSegment) -> list[SessionEvent]:
        """Process one segment: commands short-circuit, the rest is extracted."""
        if self.phase not in (Phase.LIVE, Phase.PLAYING):
            raise IllegalTransition(f"cannot handle segments in phase {self.phase.value}")
        drafts = self._route_segment(seg, self.topics, self.layout, shadow=False)
        return self.log.commit(drafts, self.clock.now())

    def record_segment(self, seg: TranscriptSegment) -> None:
        """Capture a segment for later playback; no events are emitted."""
        if self.phase is not Phase.RECORDING:
            raise IllegalTransition(f"cannot record in phase {self.phase.value}")
        offset = max(0.0, seg.t_start - (self._recording_t0 or 0.0))
        self._recording.append((offset, seg))
        store, layout = self._shadow  # populated in start_recording
        self._route_segment(seg, store, layout, shadow=True)

    def _route_segment(
        self, seg: TranscriptSegment, store: TopicStore, layout: Layout, shadow: bool
    ) -> list[EventDraft]:
        now = self.clock.now()
        cmd = parse_command(seg.text)
        if cmd.kind is not CommandKind.NOT_A_COMMAND:
            def expand(topic: Topic) -> list[EventDraft]:
                return expand_topic(topic, self._complete_cached, store, layout, now)

            return execute_command(cmd, store, layout, now, expand=expand)

        if not shadow and self.add_target is not None:
            return self._append_to_target(seg, store, layout)

        return self._extract_segment(seg, store, layout, now)

    def _append_to_target(
        self, seg: TranscriptSegment, store: TopicStore, layout: Layout
    ) -> list[EventDraft]:
        topic = store.get(self.add_target or "")
        if topic is None:
            self.add_target = None
            return [warning("missing_topic", "add-to-topic target disappeared")]
        pairs = [(seg.id, seg.text)]
        store.append_sentences(topic.key, pairs)
        radius = scale_radius(topic.word_count, self.cfg)
        drafts = [
            EventDraft(
                EventKind.TRANSCRIPT_APPENDED,
                {
                    "topic_key": topic.key,
                    "sentences": [[sid, s] for sid, s in pairs],
                    "word_count": topic.word_count,
                },
            ),
            EventDraft(
                EventKind.BALLOON_GROWN,
                {"topic_key": topic.key, "radius": radius, "word_count": topic.word_count},
            ),
        ]
        drafts.extend(layout.set_radius(topic.key, radius))
        return drafts

    def _extract_segment(
        self, seg: TranscriptSegment, store: TopicStore, layout: Layout, now: float
    ) -> list[EventDraft]:
        request = build_prompt(seg.text, store.titles())
        cached = self.cache.get(request.prompt)
        if cached is not None:
            try:
                extraction = parse_response(cached)
            except ParseFailure as exc:
                return [warning("parse_failure", str(exc), segment_id=seg.id)]
        else:
            try:
                raw = self.provider.complete(request)
            except ProviderError as exc:
                return [warning("provider_error", str(exc), segment_id=seg.id)]
            self.cache.put(request.prompt, raw)
            try:
                extraction = parse_response(raw)
            except ParseFailure:
                # Retry once, then give up on this segment.
                try:
                    raw = self.provider.complete(request)
                except ProviderError as exc:
                    return [warning("provider_error", str(exc), segment_id=seg.id)]
                self.cache.put(request.prompt, raw)
                try:
                    extraction = parse_response(raw)
                except ParseFailure as exc:
                    return [warning("parse_failure", str(exc), segment_id=seg.id)]
        return apply_extraction(extraction, store, layout, now, segment_id=seg.id)

    def _complete_cached(self, request: ProviderRequest) -> str:
        cached = self.cache.get(request.prompt)
        if cached is not None:
            return cached
        raw = self.provider.complete(request)
        self.cache.put(request.prompt, raw)
        return raw

    # -- playback ---------------------------------------------------------------

    def play(self, rate: float = 1.0) -> list[SessionEvent]:
        """Start replaying the recording (Recorded -> Playing)."""
        if self.phase is Phase.RECORDED and not self._recording:
            raise EmptyRecording("recording captured no segments")
        self._transition(Phase.PLAYING)
        if rate <= 0:
            rate = 1.0
        self._playback_rate = rate
        self._playback_index = 0
        self._playback_anchor = self.clock.now()
        return self.log.commit(
            [EventDraft(EventKind.PLAYBACK_STARTED,
                        {"rate": rate, "segments": len(self._recording)})],
            self.clock.now(),
        )

    def playback_pending(self) -> bool:
        return self.phase is Phase.PLAYING and self._playback_index < len(self._recording)

    def playback_next_due(self) -> float | None:
        """Engine time at which the next recorded segment is due, if any."""
        if not self.playback_pending():
            return None
        offset, _ = self._recording[self._playback_index]
        return self._playback_anchor + offset / self._playback_rate

    def playback_advance(self) -> list[SessionEvent]:
        """Sleep until the next recorded segment is due, then process it."""
        if not self.playback_pending():
            return []
        offset, seg = self._recording[self._playback_index]
        due = self._playback_anchor + offset / self._playback_rate
        self.clock.sleep(due - self.clock.now())
        events = self.handle_segment(seg)
        self._playback_index += 1
        if self._playback_index >= len(self._recording):
            events.extend(
                self.log.commit([EventDraft(EventKind.PLAYBACK_FINISHED, {})],
                                self.clock.now())
            )
            self._transition(Phase.DONE)
        return events

    def run_playback(self) -> list[SessionEvent]:
        events: list[SessionEvent] = []
        while self.playback_pending():
            events.extend(self.playback_advance())
        return events

    def record_and_play(self, segments: list[TranscriptSegment], rate: float = 1.0
                        ) -> list[SessionEvent]:
        """Record a batch of segments, then play them back at ``rate``."""
        if self.phase is Phase.IDLE:
            self.start_recording()
        for seg in segments:
            self.record_segment(seg)
        self.stop_recording()
        if not self._recording:
            raise EmptyRecording("recording captured no segments")
        events = self.play(rate)
        events.extend(self.run_playback())
        return events

    # -- interactions -------------------------------------------------------------

    def update_gaze(self, origin: Vec3, direction: Vec3) -> None:
        self.layout.user_pose = GazeState.looking(origin, direction)

    def grab(self, topic_key: str, position: Vec3) -> list[SessionEvent]:
        drafts = self.layout.grab_move(topic_key, position)
        return self.log.commit(drafts, self.clock.now())

    def organize(self) -> list[SessionEvent]:
        drafts = self.layout.organize(self.layout.user_pose)
        return self.log.commit(drafts, self.clock.now())

    def tick(self) -> list[SessionEvent]:
        """Advance height drift; a no-op outside the speaking phases."""
        if self.phase not in (Phase.LIVE, Phase.PLAYING):
            return []
        drafts = self.layout.step_drift(self.clock.now())
        return self.log.commit(drafts, self.clock.now())

    def view_topic(self, topic_key: str) -> Topic | None:
        return self.topics.get(topic_key)

    def delete_balloon(self, topic_key: str) -> list[SessionEvent]:
        cmd = VoiceCommand(CommandKind.DELETE, arg_a=topic_key)
        drafts = execute_command(cmd, self.topics, self.layout, self.clock.now())
        return self.log.commit(drafts, self.clock.now())

    def begin_add(self, topic_key: str) -> list[SessionEvent]:
        if topic_key not in self.topics:
            return self.log.commit(
                [warning("missing_topic", f"no topic '{topic_key}' to add to")],
                self.clock.now(),
            )
        self.add_target = topic_key
        return []

    def finish_add(self) -> list[SessionEvent]:
        self.add_target = None
        return []

    # -- persistence -----------------------------------------------------------------

    def to_doc(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "session_id": self.session_id,
            "mode": self.mode.value if self.mode else None,
            "phase": self.phase.value,
            "config": self.cfg.to_json(),
            "clock_now": self.clock.now(),
            "add_target": self.add_target,
            "segment_counter": self._segment_counter,
            "gaze": {
                "origin": list(self.layout.user_pose.origin),
                "direction": list(self.layout.user_pose.direction),
            },
            "organized_wall": self.layout.organized_wall,
            "events": [e.to_json() for e in self.log.events],
            "topics": self.topics.to_json(),
            "layout": self.layout.snapshot(),
            "provider_cache": self.cache.to_json(),
            "rng_state": self.layout.rng_state_json(),
            "recording": [
                {"offset": off, "segment": seg.to_json()} for off, seg in self._recording
            ],
            "recording_t0": self._recording_t0,
            "playback": {
                "rate": self._playback_rate,
                "next_index": self._playback_index,
                "anchor": self._playback_anchor,
            },
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_doc(), indent=2, sort_keys=True),
                        encoding="utf-8")
        return path

    @classmethod
    def from_doc(cls, doc: dict, provider: Provider | None = None,
                 clock: Clock | None = None) -> "Engine":
        if not isinstance(doc, dict):
            raise PersistenceError("session document must be an object")
        version = _req(doc, "format_version")
        if version != FORMAT_VERSION:
            raise PersistenceError(f"unsupported format_version {version!r}",
                                   "format_version")
        try:
            cfg = RoomConfig.from_json(_req(doc, "config"))
        except PersistenceError:
            raise
        except Exception as exc:
            raise PersistenceError(f"bad config: {exc}", "config") from exc

        clock_now = _req(doc, "clock_now")
        engine = cls(
            cfg=cfg,
            provider=provider,
            clock=clock if clock is not None else WallClock(initial=clock_now),
            session_id=_req(doc, "session_id"),
        )
        engine.phase = _parse_enum(Phase, _req(doc, "phase"), "phase")
        mode = doc.get("mode")
        engine.mode = _parse_enum(Mode, mode, "mode") if mode is not None else None
        engine.add_target = doc.get("add_target")
        engine._segment_counter = doc.get("segment_counter", 0)

        gaze = _req(doc, "gaze")
        try:
            engine.layout.user_pose = GazeState(
                tuple(_req(gaze, "origin", "gaze.origin")),
                tuple(_req(gaze, "direction", "gaze.direction")),
            )
        except ValueError as exc:
            raise PersistenceError(str(exc), "gaze.direction") from exc
        engine.layout.organized_wall = doc.get("organized_wall")

        for i, ev in enumerate(_req(doc, "events")):
            try:
                event = SessionEvent.from_json(ev)
            except Exception as exc:
                raise PersistenceError(f"bad event: {exc}", f"events[{i}]") from exc
            engine.log.events.append(event)
        if engine.log.events:
            engine.log._next_seq = engine.log.events[-1].seq + 1
            engine.log._last_t = engine.log.events[-1].t

        try:
            engine.topics = TopicStore.from_json(_req(doc, "topics"))
        except PersistenceError:
            raise
        except Exception as exc:
            raise PersistenceError(f"bad topics: {exc}", "topics") from exc
        try:
            engine.layout.load_snapshot(_req(doc, "layout"))
        except PersistenceError:
            raise
        except Exception as exc:
            raise PersistenceError(f"bad layout: {exc}", "layout") from exc
        engine.cache = ProviderCache.from_json(_req(doc, "provider_cache"))
        try:
            engine.layout.restore_rng(_req(doc, "rng_state"))
        except PersistenceError:
            raise
        except Exception as exc:
            raise PersistenceError(f"bad rng_state: {exc}", "rng_state") from exc

        for i, item in enumerate(_req(doc, "recording")):
            try:
                seg = TranscriptSegment.from_json(item["segment"])
                engine._recording.append((item["offset"], seg))
            except Exception as exc:
                raise PersistenceError(f"bad recording entry: {exc}",
                                       f"recording[{i}]") from exc
        engine._recording_t0 = doc.get("recording_t0")
        playback = _req(doc, "playback")
        engine._playback_rate = playback.get("rate", 1.0)
        engine._playback_index = playback.get("next_index", 0)
        engine._playback_anchor = playback.get("anchor", 0.0)

        if engine.phase is Phase.RECORDING:
            # Shadow state cannot be serialized faithfully mid-recording;
            # rebuild it by re-running the captured segments.
            engine._shadow = (TopicStore(),
                              Layout(cfg, rng=random.Random(cfg.rng_seed)))
            store, layout = engine._shadow
            for _, seg in engine._recording:
                engine._route_segment(seg, store, layout, shadow=True)
        return engine

    @classmethod
    def load(cls, path: str | Path, provider: Provider | None = None,
             clock: Clock | None = None) -> "Engine":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise PersistenceError(f"cannot read session file: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PersistenceError(f"session file is not valid JSON: {exc}") from exc
        return cls.from_doc(doc, provider=provider, clock=clock)


def _req(doc: dict, key: str, path: str | None = None):
    if key not in doc:
        raise PersistenceError("missing required field", path or key)
    return doc[key]


def _parse_enum(enum_cls, value, path: str):
    try:
        return enum_cls(value)
    except ValueError as exc:
        raise PersistenceError(f"bad value {value!r}", path) from exc


def rebuild(events: list[SessionEvent]) -> tuple[TopicStore, dict[str, Balloon]]:
    """Fold an event log into (topic store, balloons) from an empty state.

    This is the event-sourcing contract: the log alone fully determines the
    scene, positions included, with no provider or RNG involvement.
    """
    store = TopicStore()
    balloons: dict[str, Balloon] = {}
    for ev in events:
        p = ev.payload
        if ev.kind is EventKind.BALLOON_CREATED:
            topic = Topic(
                key=p["topic_key"],
                title=p["title"],
                created_at=p["created_at"],
                origin=TopicOrigin(p["origin"]),
                sentences=[(sid, s) for sid, s in p["sentences"]],
            )
            store._topics[topic.key] = topic
            balloons[topic.key] = Balloon(
                topic_key=topic.key,
                center=tuple(p["position"]),
                radius=p["radius"],
                created_at=p["created_at"],
                alpha=p.get("alpha", 0.4),
            )
        elif ev.kind is EventKind.TRANSCRIPT_APPENDED:
            store.append_sentences(p["topic_key"],
                                   [(sid, s) for sid, s in p["sentences"]])
        elif ev.kind is EventKind.BALLOON_GROWN:
            balloons[p["topic_key"]].radius = p["radius"]
        elif ev.kind is EventKind.BALLOON_MOVED:
            b = balloons[p["topic_key"]]
            b.center = tuple(p["position"])
            b.pinned = p["pinned"]
        elif ev.kind is EventKind.BALLOON_DELETED:
            store.delete(p["topic_key"])
            balloons.pop(p["topic_key"])
        elif ev.kind is EventKind.TOPIC_RENAMED:
            store.rename(p["old_key"], p["title"])
            old, new = p["old_key"], p["new_key"]
            balloons = {(new if k == old else k): b for k, b in balloons.items()}
            balloons[new].topic_key = new
        elif ev.kind is EventKind.TOPICS_MERGED:
            src, dst = p["source_key"], p["target_key"]
            store.delete(src)
            store.append_sentences(dst, [(sid, s) for sid, s in p["moved"]])
            balloons.pop(src)
            balloons[dst].radius = p["radius"]
    return store, balloons
