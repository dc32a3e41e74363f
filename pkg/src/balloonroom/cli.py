"""Operator entry points.

    balloonroom serve     -- run the HTTP/stream service
    balloonroom replay    -- process a transcript file headlessly
    balloonroom export    -- dump events/layout/topics from a saved session
    balloonroom simulate  -- run a timed input script and check its assertions

Replay and simulate drive the engine in-process with an injected clock, so
their outputs are deterministic functions of (inputs, flags, seed); serve
wraps the same core for live clients.

Exit codes: 0 success, 1 failed assertion, 2 unreadable input, 3 provider
configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import EngineError, PersistenceError, ProviderError
from .model import RoomConfig
from .providers import make_provider
from .segmenter import load_transcript
from .session import Engine, FakeClock, Phase

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_UNREADABLE = 2
EXIT_PROVIDER = 3


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="balloonroom")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    serve = sub.add_parser("serve", help="run the HTTP/stream service")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default=None, help="bind address (default BIND_ADDR or 127.0.0.1)")
    serve.add_argument("--provider", choices=["live", "scripted", "rule"], default=None)
    serve.add_argument("--provider-script", default=None)
    serve.set_defaults(func=_cmd_serve)

    replay = sub.add_parser("replay", help="replay a transcript file headlessly")
    replay.add_argument("file")
    replay.add_argument("--seed", type=int, default=0)
    replay.add_argument("--provider", choices=["live", "scripted", "rule"], default="rule")
    replay.add_argument("--provider-script", default=None)
    replay.add_argument("--out", default="out", help="output directory")
    replay.add_argument("--speed", type=float, default=2.5,
                        help="synthetic words per second for untimed lines")
    replay.set_defaults(func=_cmd_replay)

    export = sub.add_parser("export", help="export snapshots from a saved session")
    export.add_argument("file")
    export.add_argument("--out", default="out")
    export.set_defaults(func=_cmd_export)

    simulate = sub.add_parser("simulate", help="run a timed input script with assertions")
    simulate.add_argument("--script", required=True)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--provider", choices=["live", "scripted", "rule"], default="rule")
    simulate.add_argument("--provider-script", default=None)
    simulate.set_defaults(func=_cmd_simulate)

    return parser


def _make_provider(args) -> object:
    if args.provider == "live" and not os.environ.get("PROVIDER_API_KEY"):
        raise ProviderError("live provider requires PROVIDER_API_KEY")
    return make_provider(args.provider, args.provider_script)


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceSettings, create_app

    settings = ServiceSettings.from_env()
    if args.provider:
        settings.provider_mode = args.provider
    if args.provider_script:
        settings.provider_script = args.provider_script
    if settings.provider_mode == "live" and not os.environ.get("PROVIDER_API_KEY"):
        print("error: live provider requires PROVIDER_API_KEY", file=sys.stderr)
        return EXIT_PROVIDER
    host = args.host or os.environ.get("BIND_ADDR", "127.0.0.1")
    uvicorn.run(create_app(settings), host=host, port=args.port)
    return EXIT_OK


def _cmd_replay(args) -> int:
    try:
        segments = load_transcript(args.file, words_per_second=args.speed)
    except OSError as exc:
        print(f"error: cannot read {args.file}: {exc}", file=sys.stderr)
        return EXIT_UNREADABLE
    try:
        provider = _make_provider(args)
    except ProviderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER

    clock = FakeClock()
    engine = Engine(cfg=RoomConfig(rng_seed=args.seed), provider=provider,
                    clock=clock, session_id="replay")
    engine.start_session()
    for seg in segments:
        clock.advance_to(seg.t_end)
        engine.handle_segment(seg)
        engine.tick()

    out = Path(args.out)
    _write_json(out / "events.json", [e.to_json() for e in engine.log.events])
    _write_json(out / "layout.json", engine.layout.snapshot())
    _write_json(out / "topics.json", engine.topics.to_json())
    print(f"replayed {len(segments)} segments -> {len(engine.log.events)} events, "
          f"{len(engine.topics)} topics")
    return EXIT_OK


def _cmd_export(args) -> int:
    try:
        engine = Engine.load(args.file)
    except PersistenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNREADABLE
    out = Path(args.out)
    _write_json(out / "events.json", [e.to_json() for e in engine.log.events])
    _write_json(out / "layout.json", engine.layout.snapshot())
    _write_json(out / "topics.json", engine.topics.to_json())
    print(f"exported session {engine.session_id}: {len(engine.log.events)} events")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    try:
        doc = json.loads(Path(args.script).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read script: {exc}", file=sys.stderr)
        return EXIT_UNREADABLE
    try:
        provider = _make_provider(args)
    except ProviderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER

    steps = doc["steps"] if isinstance(doc, dict) else doc
    sim = Simulation(seed=args.seed, provider_factory=lambda: provider)
    for i, step in enumerate(steps):
        try:
            message = sim.run_step(step)
        except SimulationFailure as exc:
            print(f"FAIL step {i}: {exc}")
            return EXIT_ASSERTION
        except EngineError as exc:
            print(f"FAIL step {i}: {type(exc).__name__}: {exc}")
            return EXIT_ASSERTION
        print(f"PASS step {i}: {message}")
    print(f"all {len(steps)} steps passed")
    return EXIT_OK


class SimulationFailure(Exception):
    pass


class Simulation:
    """Scripted driver over the engine with a fake clock.

    Steps are objects with a ``do`` action plus parameters; ``at`` advances
    the clock before the action runs. Supported actions: start,
    start_recording, stop_recording, play, run_playback, segment, gaze,
    grab, click, organize, tick, save, load, new_session, assert.
    """

    def __init__(self, seed: int = 0, provider_factory=None):
        self.seed = seed
        self.provider_factory = provider_factory or (lambda: None)
        self.clock = FakeClock()
        self.engine = self._fresh_engine()

    def _fresh_engine(self) -> Engine:
        return Engine(cfg=RoomConfig(rng_seed=self.seed),
                      provider=self.provider_factory(), clock=self.clock,
                      session_id="simulate")

    def run_step(self, step: dict) -> str:
        if "at" in step:
            self.clock.advance_to(float(step["at"]))
        action = step.get("do", "assert" if "assert" in step else None)
        if action is None:
            raise SimulationFailure(f"step has no action: {step}")

        if action == "start":
            self.engine.start_session()
            return "session started"
        if action == "start_recording":
            self.engine.start_recording()
            return "recording started"
        if action == "stop_recording":
            self.engine.stop_recording()
            return "recording stopped"
        if action == "play":
            self.engine.play(step.get("rate", 1.0))
            return "playback started"
        if action == "run_playback":
            self.engine.run_playback()
            return "playback finished"
        if action == "segment":
            events = self.engine.ingest_text(step["text"])
            return f"segment -> {len(events)} events"
        if action == "gaze":
            self.engine.update_gaze(tuple(step["origin"]), tuple(step["direction"]))
            return "gaze updated"
        if action == "grab":
            self.engine.grab(step["balloon"], tuple(step["position"]))
            return "balloon moved"
        if action == "click":
            return self._click(step)
        if action == "organize":
            self.engine.organize()
            return "organized"
        if action == "tick":
            self.engine.tick()
            return "drift stepped"
        if action == "save":
            self.engine.save(step["path"])
            return f"saved to {step['path']}"
        if action == "load":
            self.engine = Engine.load(step["path"], provider=self.provider_factory(),
                                      clock=self.clock)
            return f"loaded from {step['path']}"
        if action == "new_session":
            self.engine = self._fresh_engine()
            return "new session"
        if action == "assert":
            return self._check(step["assert"] if "assert" in step else step["checks"])
        raise SimulationFailure(f"unknown action {action!r}")

    def _click(self, step: dict) -> str:
        button = step["button"]
        key = step.get("balloon", "")
        if button == "View":
            topic = self.engine.view_topic(key)
            if topic is None:
                raise SimulationFailure(f"view: no topic {key!r}")
            return f"view -> {len(topic.sentences)} sentences"
        if button == "Delete":
            self.engine.delete_balloon(key)
            return "deleted"
        if button == "Add":
            self.engine.begin_add(key)
            return "add mode"
        if button == "Finish":
            self.engine.finish_add()
            return "add mode off"
        raise SimulationFailure(f"unknown button {button!r}")

    def _check(self, checks: dict) -> str:
        e = self.engine
        for name, expected in checks.items():
            if name == "balloon_count":
                actual = len(e.layout.balloons)
                if actual != expected:
                    raise SimulationFailure(f"balloon_count {actual} != {expected}")
            elif name == "min_balloons":
                actual = len(e.layout.balloons)
                if actual < expected:
                    raise SimulationFailure(f"balloon_count {actual} < {expected}")
            elif name == "topic_exists":
                for key in _as_list(expected):
                    if key not in e.topics:
                        raise SimulationFailure(f"topic {key!r} missing")
            elif name == "topic_absent":
                for key in _as_list(expected):
                    if key in e.topics:
                        raise SimulationFailure(f"topic {key!r} still present")
            elif name == "word_count":
                topic = e.topics.get(expected["topic"])
                if topic is None:
                    raise SimulationFailure(f"topic {expected['topic']!r} missing")
                if topic.word_count != expected["equals"]:
                    raise SimulationFailure(
                        f"word_count({expected['topic']}) {topic.word_count} "
                        f"!= {expected['equals']}")
            elif name == "phase":
                if e.phase is not Phase(expected):
                    raise SimulationFailure(f"phase {e.phase.value} != {expected}")
            elif name == "pinned":
                for key in _as_list(expected):
                    balloon = e.layout.balloons.get(key)
                    if balloon is None or not balloon.pinned:
                        raise SimulationFailure(f"balloon {key!r} not pinned")
            elif name == "event_count_at_least":
                if len(e.log.events) < expected:
                    raise SimulationFailure(
                        f"only {len(e.log.events)} events, wanted >= {expected}")
            else:
                raise SimulationFailure(f"unknown check {name!r}")
        return f"assert ok ({', '.join(checks)})"


def _as_list(value) -> list:
    return value if isinstance(value, list) else [value]


if __name__ == "__main__":
    sys.exit(main())
