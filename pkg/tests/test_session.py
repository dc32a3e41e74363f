import itertools
import json
import math
import random

import pytest

from balloonroom.errors import (
    EmptyRecording,
    IllegalTransition,
    PersistenceError,
    ProviderError,
)
from balloonroom.events import EventKind
from balloonroom.model import RoomConfig, SegmentSource, TranscriptSegment
from balloonroom.providers import ScriptedProvider
from balloonroom.session import Engine, FakeClock, Mode, Phase, rebuild

from .helpers import render_extract_response

SCRIPT = {
    "Plan the route": render_extract_response([("Route", ["Plan the route"])]),
    "Check the budget": render_extract_response([("Budget", ["Check the budget"])]),
    "Route needs snacks": render_extract_response([("Route", ["Route needs snacks"])]),
    "alpha beta": render_extract_response([("Alpha", ["alpha beta"])]),
}


def scripted_engine(seed: int = 0, clock: FakeClock | None = None) -> Engine:
    provider = ScriptedProvider(extract=dict(SCRIPT))
    return Engine(cfg=RoomConfig(rng_seed=seed), provider=provider,
                  clock=clock or FakeClock(), session_id="test")


def seg(text: str, t: float, source=SegmentSource.LIVE, sid: str = "s") -> TranscriptSegment:
    return TranscriptSegment(id=f"{sid}-{t}", text=text, t_start=t, t_end=t, source=source)


def log_signature(engine: Engine) -> list[tuple]:
    """Event log with wall-clock timestamps stripped."""
    return [(e.seq, e.kind.value, json.dumps(e.payload, sort_keys=True))
            for e in engine.log.events]


class TestPhaseMachine:
    def test_start_emits_session_and_timer(self):
        engine = scripted_engine()
        events = engine.start_session()
        assert [e.kind for e in events] == [EventKind.SESSION_STARTED,
                                            EventKind.TIMER_STARTED]
        assert engine.phase is Phase.LIVE
        assert engine.mode is Mode.INTERACTIVE

    def test_start_twice_is_illegal(self):
        engine = scripted_engine()
        engine.start_session()
        with pytest.raises(IllegalTransition):
            engine.start_session()

    def test_invalid_config_rejected_at_construction(self):
        from balloonroom.errors import ConfigError

        with pytest.raises(ConfigError):
            Engine(cfg=RoomConfig(h_spawn=-1.0))

    def test_segment_in_recorded_phase_is_illegal(self):
        engine = scripted_engine()
        engine.start_recording()
        engine.record_segment(seg("alpha beta", 1.0))
        engine.stop_recording()
        with pytest.raises(IllegalTransition):
            engine.handle_segment(seg("alpha beta", 2.0))

    def test_empty_recording_cannot_play(self):
        engine = scripted_engine()
        engine.start_recording()
        engine.stop_recording()
        with pytest.raises(EmptyRecording):
            engine.play()

    def test_exhaustive_small_model(self):
        """Every op sequence of length <= 6 matches the abstract phase model."""
        OPS = ("start_session", "start_recording", "ingest", "stop_recording",
               "play", "run_playback")

        def model_step(state, op):
            phase, has_rec = state
            if op == "start_session":
                return ("Live", has_rec) if phase == "Idle" else None
            if op == "start_recording":
                return ("Recording", has_rec) if phase == "Idle" else None
            if op == "ingest":
                if phase == "Recording":
                    return (phase, True)
                if phase in ("Live", "Playing"):
                    return (phase, has_rec)
                return None
            if op == "stop_recording":
                return ("Recorded", has_rec) if phase == "Recording" else None
            if op == "play":
                if phase == "Recorded" and has_rec:
                    return ("Playing", has_rec)
                return None
            if op == "run_playback":  # benign no-op outside Playing
                return ("Done", has_rec) if phase == "Playing" else (phase, has_rec)
            raise AssertionError(op)

        def engine_step(engine, op):
            if op == "start_session":
                engine.start_session()
            elif op == "start_recording":
                engine.start_recording()
            elif op == "ingest":
                engine.ingest_text("alpha beta")
            elif op == "stop_recording":
                engine.stop_recording()
            elif op == "play":
                engine.play()
            else:
                engine.run_playback()
                if engine.phase is Phase.PLAYING:  # empty pending: still legal
                    raise AssertionError("run_playback left Playing unfinished")

        checked = 0
        for length in range(1, 7):
            for ops in itertools.product(OPS, repeat=length):
                # Prune sequences whose prefix already failed in the model:
                # walk model and engine together instead.
                engine = scripted_engine()
                state = ("Idle", False)
                for op in ops:
                    expected = model_step(state, op)
                    if expected is None:
                        before = (engine.phase, len(engine._recording))
                        with pytest.raises((IllegalTransition, EmptyRecording)):
                            engine_step(engine, op)
                        assert (engine.phase, len(engine._recording)) == before
                        break
                    engine_step(engine, op)
                    state = expected
                    assert engine.phase.value == state[0]
                checked += 1
        assert checked > 0


class TestSegmentRouting:
    def test_command_short_circuits_provider(self):
        engine = scripted_engine()
        engine.start_session()
        engine.handle_segment(seg("Create Rome", 1.0))
        assert engine.provider.calls == 0
        assert "rome" in engine.topics

    def test_delete_command(self):
        engine = scripted_engine()
        engine.start_session()
        engine.handle_segment(seg("Create Rome", 1.0))
        events = engine.handle_segment(seg("Delete Rome", 2.0))
        assert [e.kind for e in events] == [EventKind.BALLOON_DELETED]
        assert "rome" not in engine.topics

    def test_plain_sentence_goes_through_extraction(self):
        engine = scripted_engine()
        engine.start_session()
        events = engine.handle_segment(seg("Plan the route", 1.0))
        kinds = [e.kind for e in events]
        assert EventKind.BALLOON_CREATED in kinds
        assert engine.provider.calls == 1
        assert engine.topics.get("route").word_count == 3

    def test_created_event_carries_position_and_radius(self):
        engine = scripted_engine()
        engine.start_session()
        events = engine.handle_segment(seg("Plan the route", 1.0))
        created = next(e for e in events if e.kind is EventKind.BALLOON_CREATED)
        assert len(created.payload["position"]) == 3
        assert created.payload["radius"] > 0

    def test_provider_failure_becomes_warning(self):
        class Boom:
            calls = 0

            def complete(self, request):
                raise ProviderError("no backend")

        engine = Engine(cfg=RoomConfig(), provider=Boom(), clock=FakeClock())
        engine.start_session()
        events = engine.handle_segment(seg("anything goes", 1.0))
        assert [e.kind for e in events] == [EventKind.WARNING]
        assert events[0].payload["code"] == "provider_error"

    def test_malformed_response_retries_once_then_warns(self):
        class Gibberish:
            def __init__(self):
                self.calls = 0

            def complete(self, request):
                self.calls += 1
                return "not the format"

        provider = Gibberish()
        engine = Engine(cfg=RoomConfig(), provider=provider, clock=FakeClock())
        engine.start_session()
        events = engine.handle_segment(seg("hello there", 1.0))
        assert provider.calls == 2
        assert events[0].payload["code"] == "parse_failure"
        assert len(engine.topics) == 0

    def test_retry_can_succeed(self):
        class FlakyOnce:
            def __init__(self):
                self.calls = 0

            def complete(self, request):
                self.calls += 1
                if self.calls == 1:
                    return "garbage"
                return "TOPIC: Fine\nSENT: hello there"

        engine = Engine(cfg=RoomConfig(), provider=FlakyOnce(), clock=FakeClock())
        engine.start_session()
        engine.handle_segment(seg("hello there", 1.0))
        assert "fine" in engine.topics

    def test_ingest_text_splits_sentences(self):
        engine = scripted_engine()
        engine.start_session()
        provider = engine.provider
        provider.extract["First point."] = render_extract_response([("One", ["First point."])])
        provider.extract["Second point."] = render_extract_response([("Two", ["Second point."])])
        engine.ingest_text("First point. Second point.")
        assert set(engine.topics.keys()) == {"one", "two"}


class TestAddMode:
    def test_add_capture_bypasses_extraction(self):
        engine = scripted_engine()
        engine.start_session()
        engine.handle_segment(seg("Plan the route", 1.0))
        calls_before = engine.provider.calls
        engine.begin_add("route")
        events = engine.handle_segment(seg("bring a paper map", 2.0))
        kinds = [e.kind for e in events]
        assert kinds[:2] == [EventKind.TRANSCRIPT_APPENDED, EventKind.BALLOON_GROWN]
        assert engine.provider.calls == calls_before
        assert engine.topics.get("route").word_count == 3 + 4

    def test_commands_still_work_in_add_mode(self):
        engine = scripted_engine()
        engine.start_session()
        engine.handle_segment(seg("Plan the route", 1.0))
        engine.begin_add("route")
        engine.handle_segment(seg("Create Snacks", 2.0))
        assert "snacks" in engine.topics  # command executed, not appended

    def test_finish_exits_add_mode(self):
        engine = scripted_engine()
        engine.start_session()
        engine.handle_segment(seg("Plan the route", 1.0))
        engine.begin_add("route")
        engine.finish_add()
        engine.handle_segment(seg("Check the budget", 2.0))
        assert "budget" in engine.topics

    def test_add_to_missing_topic_warns(self):
        engine = scripted_engine()
        engine.start_session()
        events = engine.begin_add("ghost")
        assert events[0].kind is EventKind.WARNING


class TestRecordAndPlay:
    def _record(self, engine: Engine, clock: FakeClock):
        engine.start_recording()
        for t, text in [(1.0, "Plan the route"), (5.0, "Check the budget"),
                        (9.0, "Route needs snacks")]:
            clock.advance_to(t)
            engine.ingest_text(text)
        clock.advance_to(10.0)
        engine.stop_recording()

    def test_playback_times_match_offsets(self):
        clock = FakeClock()
        engine = scripted_engine(clock=clock)
        self._record(engine, clock)
        engine.play(rate=1.0)
        events = engine.run_playback()
        created = [e for e in events if e.kind is EventKind.BALLOON_CREATED]
        # recording started at t=0, so offsets are the original times,
        # re-anchored at play start (t=10)
        assert [round(e.t, 6) for e in created] == [11.0, 15.0]
        grown = [e for e in events if e.kind is EventKind.BALLOON_GROWN]
        assert [round(e.t, 6) for e in grown] == [19.0]
        assert engine.phase is Phase.DONE

    def test_double_rate_halves_offsets(self):
        clock = FakeClock()
        engine = scripted_engine(clock=clock)
        self._record(engine, clock)
        engine.play(rate=2.0)
        events = engine.run_playback()
        created = [e for e in events if e.kind is EventKind.BALLOON_CREATED]
        assert [round(e.t, 6) for e in created] == [10.5, 12.5]

    def test_playback_hits_cache_not_provider(self):
        clock = FakeClock()
        engine = scripted_engine(clock=clock)
        self._record(engine, clock)
        calls_after_recording = engine.provider.calls
        assert calls_after_recording == 3  # shadow run populated the cache

        engine.play()
        engine.run_playback()
        assert engine.provider.calls == calls_after_recording

    def test_playback_is_reproducible_from_saved_state(self, tmp_path):
        clock = FakeClock()
        engine = scripted_engine(clock=clock)
        self._record(engine, clock)
        path = tmp_path / "session.json"
        engine.save(path)

        class NeverCall:
            def complete(self, request):
                raise AssertionError("playback must not call the provider")

        runs = []
        for _ in range(2):
            replay = Engine.load(path, provider=NeverCall(), clock=FakeClock(start=10.0))
            replay.play()
            replay.run_playback()
            runs.append(log_signature(replay))
        assert runs[0] == runs[1]

    def test_record_and_play_convenience(self):
        clock = FakeClock()
        engine = scripted_engine(clock=clock)
        segments = [seg("Plan the route", 1.0, SegmentSource.RECORDING),
                    seg("Check the budget", 3.0, SegmentSource.RECORDING)]
        events = engine.record_and_play(segments)
        kinds = [e.kind for e in events]
        assert kinds[0] is EventKind.PLAYBACK_STARTED
        assert kinds[-1] is EventKind.PLAYBACK_FINISHED
        assert engine.phase is Phase.DONE


class TestPersistence:
    def _busy_engine(self, tmp_path=None):
        clock = FakeClock()
        engine = scripted_engine(clock=clock)
        engine.start_session()
        clock.advance_to(1.0)
        engine.handle_segment(seg("Plan the route", 1.0))
        clock.advance_to(2.0)
        engine.handle_segment(seg("Check the budget", 2.0))
        engine.handle_segment(seg("Merge Budget into Route", 3.0))
        engine.tick()
        engine.organize()
        return engine, clock

    def test_round_trip_deep_equality(self, tmp_path):
        engine, clock = self._busy_engine()
        path = engine.save(tmp_path / "s.session.json")
        loaded = Engine.load(path, clock=FakeClock(start=clock.now()))
        assert loaded.to_doc() == engine.to_doc()

    def test_truncated_file_fails_cleanly(self, tmp_path):
        engine, _ = self._busy_engine()
        path = engine.save(tmp_path / "s.session.json")
        path.write_text(path.read_text()[: len(path.read_text()) // 2])
        with pytest.raises(PersistenceError):
            Engine.load(path)

    def test_unsupported_version_names_field(self, tmp_path):
        engine, _ = self._busy_engine()
        doc = engine.to_doc()
        doc["format_version"] = 99
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(PersistenceError) as err:
            Engine.load(path)
        assert err.value.field_path == "format_version"

    def test_corrupt_event_names_index(self, tmp_path):
        engine, _ = self._busy_engine()
        doc = engine.to_doc()
        doc["events"][2] = {"bogus": True}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(PersistenceError) as err:
            Engine.load(path)
        assert err.value.field_path == "events[2]"

    def test_split_playback_equals_uninterrupted(self, tmp_path):
        def recorded(clock):
            engine = scripted_engine(clock=clock)
            engine.start_recording()
            for t, text in [(1.0, "Plan the route"), (4.0, "Check the budget"),
                            (7.0, "Route needs snacks")]:
                clock.advance_to(t)
                engine.ingest_text(text)
            clock.advance_to(8.0)
            engine.stop_recording()
            return engine

        clock_a = FakeClock()
        uninterrupted = recorded(clock_a)
        uninterrupted.play()
        uninterrupted.run_playback()

        clock_b = FakeClock()
        interrupted = recorded(clock_b)
        interrupted.play()
        interrupted.playback_advance()
        path = interrupted.save(tmp_path / "mid.session.json")
        resumed = Engine.load(path, clock=FakeClock(start=clock_b.now()))
        resumed.run_playback()

        assert log_signature(resumed) == log_signature(uninterrupted)
        assert resumed.phase is Phase.DONE


class TestEventSourcing:
    def test_rebuild_reconstructs_store_and_layout(self):
        clock = FakeClock()
        engine = scripted_engine(clock=clock)
        engine.start_session()
        for t, text in [(1.0, "Plan the route"), (2.0, "Check the budget"),
                        (3.0, "Route needs snacks"), (4.0, "Create Snacks"),
                        (5.0, "Change Snacks into Provisions"),
                        (6.0, "Merge Budget into Route"),
                        (7.0, "Delete Provisions")]:
            clock.advance_to(t)
            engine.handle_segment(seg(text, t))
        engine.tick()
        engine.grab("route", (2.0, 1.5, 2.0))
        engine.organize()

        store, balloons = rebuild(engine.log.events)
        assert store.to_json() == engine.topics.to_json()
        live = engine.layout.balloons
        assert set(balloons) == set(live)
        for key, b in balloons.items():
            assert b.center == live[key].center  # bit-exact positions
            assert b.radius == live[key].radius
            assert b.pinned == live[key].pinned

    def test_replaying_same_stream_gives_identical_log(self):
        def run():
            clock = FakeClock()
            engine = scripted_engine(seed=9, clock=clock)
            engine.start_session()
            for t, text in [(1.0, "Plan the route"), (2.0, "Check the budget"),
                            (3.0, "Route needs snacks")]:
                clock.advance_to(t)
                engine.handle_segment(seg(text, t))
                engine.tick()
            return log_signature(engine)

        assert run() == run()


class TestGazeAndTick:
    def test_gaze_updates_spawn_cone(self):
        engine = scripted_engine()
        engine.start_session()
        engine.update_gaze((3.0, 1.6, 3.0), (0.0, 0.0, -2.0))  # normalized
        events = engine.handle_segment(seg("Plan the route", 1.0))
        created = next(e for e in events if e.kind is EventKind.BALLOON_CREATED)
        x, y, z = created.payload["position"]
        assert z < 3.0  # spawned south of the user

    def test_tick_outside_live_is_noop(self):
        engine = scripted_engine()
        assert engine.tick() == []


class TestRandomizedInvariants:
    """Fuzz the whole engine; the cross-module invariants must always hold."""

    OPS = ("segment", "create", "delete", "merge", "grab", "organize", "tick", "gaze")

    def _run_ops(self, seed: int) -> Engine:
        rng = random.Random(seed)
        clock = FakeClock()
        provider = ScriptedProvider(default="")
        vocab = "wind river stone cloud light music harbor ember".split()
        titles = ["Alpha", "Beta", "Gamma", "Delta"]
        engine = Engine(cfg=RoomConfig(rng_seed=seed), provider=provider, clock=clock)
        engine.start_session()
        for step in range(40):
            clock.advance_to(float(step + 1))
            op = rng.choice(self.OPS)
            text = " ".join(rng.choice(vocab) for _ in range(rng.randint(2, 6)))
            provider.extract[text] = render_extract_response(
                [(rng.choice(titles), [text])] if rng.random() < 0.8 else []
            )
            if op == "segment":
                engine.handle_segment(seg(text, clock.now(), sid=f"f{step}"))
            elif op == "create":
                engine.handle_segment(seg(f"Create {rng.choice(titles)}", clock.now()))
            elif op == "delete":
                engine.handle_segment(seg(f"Delete {rng.choice(titles)}", clock.now()))
            elif op == "merge":
                a, b = rng.sample(titles, 2)
                engine.handle_segment(seg(f"Merge {a} into {b}", clock.now()))
            elif op == "grab" and engine.layout.balloons:
                key = rng.choice(list(engine.layout.balloons))
                target = (rng.uniform(-1, 7), rng.uniform(-1, 5), rng.uniform(-1, 7))
                engine.grab(key, target)
            elif op == "organize":
                engine.organize()
            elif op == "tick":
                engine.tick()
            elif op == "gaze":
                engine.update_gaze(
                    (rng.uniform(1, 5), 1.6, rng.uniform(1, 5)),
                    (rng.uniform(-1, 1), 0.0, rng.uniform(-1, 1)) if rng.random() < 0.9
                    else (0.0, 0.0, 1.0),
                )
            self._check_invariants(engine)
        return engine

    def _check_invariants(self, engine: Engine):
        cfg = engine.cfg
        # balloons and topics stay 1:1 under the same keys
        assert set(engine.layout.balloons) == set(engine.topics.keys())
        balloons = list(engine.layout.balloons.values())
        recently_warned = any(
            e.kind is EventKind.WARNING and e.payload.get("code") == "collision_unsettled"
            for e in engine.log.events[-5:]
        )
        for b in balloons:
            x, y, z = b.center
            assert b.radius - 1e-9 <= x <= cfg.width - b.radius + 1e-9
            assert b.radius - 1e-9 <= y <= cfg.height - b.radius + 1e-9
            assert b.radius - 1e-9 <= z <= cfg.depth - b.radius + 1e-9
        if not recently_warned:
            for i, a in enumerate(balloons):
                for b in balloons[i + 1:]:
                    gap = a.radius + b.radius - math.dist(a.center, b.center)
                    assert gap < 1e-3 + 1e-9, (a.topic_key, b.topic_key)
        seqs = [e.seq for e in engine.log.events]
        assert seqs == sorted(set(seqs))

    @pytest.mark.parametrize("seed", range(12))
    def test_invariants_hold_under_fuzz(self, seed):
        engine = self._run_ops(seed)
        # and the log replays to the live state
        store, balloons = rebuild(engine.log.events)
        assert store.to_json() == engine.topics.to_json()
        assert {k: b.center for k, b in balloons.items()} == {
            k: b.center for k, b in engine.layout.balloons.items()
        }
