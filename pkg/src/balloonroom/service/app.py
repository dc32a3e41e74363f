"""HTTP + streaming service around the session engine.

One process hosts many sessions. Every mutation funnels through the owning
session's lock (the single-writer queue); any number of stream subscribers
fan out from the append-only event log, each tracking its own cursor, so
every committed event reaches every subscriber exactly once and in order.

Wire schema documented in docs/protocol.md.
"""

from __future__ import annotations

import asyncio
import os
import threading
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass

from fastapi import FastAPI, HTTPException, Query, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from pydantic import TypeAdapter, ValidationError

from ..errors import EngineError, PersistenceError, ProviderError
from ..model import RoomConfig
from ..providers import make_provider
from ..session import Engine
from .schemas import (
    BalloonModel,
    ClientInput,
    CreateSessionRequest,
    CreateSessionResponse,
    EventModel,
    EventsResponse,
    SaveRequest,
    SaveResponse,
    SnapshotResponse,
    TopicModel,
)

HEARTBEAT_INTERVAL = 15.0
STREAM_POLL_INTERVAL = 0.05
DRIFT_TICK_INTERVAL = 1.0

_input_adapter: TypeAdapter = TypeAdapter(ClientInput)


@dataclass
class ServiceSettings:
    provider_mode: str = "rule"
    provider_script: str | None = None
    drift_ticker: bool = True

    @classmethod
    def from_env(cls) -> "ServiceSettings":
        return cls(
            provider_mode=os.environ.get("PROVIDER_MODE", "rule"),
            provider_script=os.environ.get("PROVIDER_SCRIPT"),
        )


class SessionHost:
    """One engine plus the lock that serializes all writes to it."""

    def __init__(self, engine: Engine):
        self.engine = engine
        self.lock = threading.Lock()
        self._player: threading.Thread | None = None

    def events_since(self, seq: int) -> list:
        with self.lock:
            return self.engine.log.since(seq)

    def tick(self) -> None:
        with self.lock:
            self.engine.tick()

    def start_playback_thread(self) -> None:
        if self._player is not None and self._player.is_alive():
            return
        self._player = threading.Thread(target=self._playback_loop, daemon=True)
        self._player.start()

    def _playback_loop(self) -> None:
        while True:
            with self.lock:
                due = self.engine.playback_next_due()
                if due is None:
                    return
                wait = due - self.engine.clock.now()
                if wait <= 0:
                    self.engine.playback_advance()
                    continue
            time.sleep(min(wait, 0.1))


def create_app(settings: ServiceSettings | None = None) -> FastAPI:
    settings = settings or ServiceSettings.from_env()
    hosts: dict[str, SessionHost] = {}

    async def _drift_ticker():
        while True:
            await asyncio.sleep(DRIFT_TICK_INTERVAL)
            for host in list(hosts.values()):
                await asyncio.to_thread(host.tick)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        ticker = asyncio.create_task(_drift_ticker()) if settings.drift_ticker else None
        yield
        if ticker is not None:
            ticker.cancel()

    app = FastAPI(title="balloonroom", version="0.1.0", lifespan=lifespan)
    app.state.hosts = hosts
    app.state.settings = settings
    # Browser clients are served from a different origin (the vite dev
    # server); auth/multi-tenancy is explicitly out of scope.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def _host(session_id: str) -> SessionHost:
        host = hosts.get(session_id)
        if host is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return host

    @app.post("/sessions", status_code=201, response_model=CreateSessionResponse)
    def create_session(req: CreateSessionRequest | None = None):
        req = req or CreateSessionRequest()
        try:
            cfg = RoomConfig.from_json({"rng_seed": req.seed, **req.config})
            provider = make_provider(settings.provider_mode, settings.provider_script)
        except (EngineError, ProviderError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        session_id = uuid.uuid4().hex[:12]
        hosts[session_id] = SessionHost(Engine(cfg=cfg, provider=provider,
                                               session_id=session_id))
        return CreateSessionResponse(id=session_id)

    @app.get("/sessions/{session_id}", response_model=SnapshotResponse)
    def snapshot(session_id: str):
        host = _host(session_id)
        with host.lock:
            e = host.engine
            return SnapshotResponse(
                id=e.session_id,
                phase=e.phase.value,
                mode=e.mode.value if e.mode else None,
                last_seq=e.log.last_seq,
                add_target=e.add_target,
                topics=[
                    TopicModel(
                        key=t.key,
                        title=t.title,
                        origin=t.origin.value,
                        created_at=t.created_at,
                        word_count=t.word_count,
                        sentences=list(t.sentences),
                    )
                    for t in e.topics.topics()
                ],
                balloons=[BalloonModel(**doc) for doc in e.layout.snapshot()],
            )

    @app.get("/sessions/{session_id}/events", response_model=EventsResponse)
    def events(session_id: str, since: int = Query(default=0, ge=0)):
        host = _host(session_id)
        return EventsResponse(
            events=[EventModel(**ev.to_json()) for ev in host.events_since(since)]
        )

    @app.post("/sessions/{session_id}/save", response_model=SaveResponse)
    def save(session_id: str, req: SaveRequest):
        host = _host(session_id)
        try:
            with host.lock:
                path = host.engine.save(req.path)
        except (OSError, PersistenceError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return SaveResponse(path=str(path))

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(ws: WebSocket, session_id: str, since: int = Query(default=0, ge=0)):
        host = hosts.get(session_id)
        if host is None:
            await ws.close(code=4404, reason=f"no session {session_id!r}")
            return
        await ws.accept()
        cursor = since
        last_traffic = time.monotonic()
        try:
            while True:
                fresh = host.events_since(cursor)
                if fresh:
                    for ev in fresh:
                        await ws.send_json({"type": "event", "event": ev.to_json()})
                    cursor = fresh[-1].seq
                    last_traffic = time.monotonic()
                try:
                    text = await asyncio.wait_for(ws.receive_text(),
                                                  timeout=STREAM_POLL_INTERVAL)
                except asyncio.TimeoutError:
                    pass
                else:
                    reply = await asyncio.to_thread(dispatch_raw, host, text)
                    if reply is not None:
                        await ws.send_json(reply)
                    last_traffic = time.monotonic()
                if time.monotonic() - last_traffic >= HEARTBEAT_INTERVAL:
                    await ws.send_json({"type": "ping"})
                    last_traffic = time.monotonic()
        except WebSocketDisconnect:
            return

    return app


def dispatch_raw(host: SessionHost, text: str) -> dict | None:
    """Validate one raw input frame and dispatch it; errors become frames."""
    try:
        data = _input_adapter.validate_json(text)
    except ValidationError as exc:
        return {"type": "error", "reason": f"malformed input: {exc.errors()[0]['msg']}"}
    return dispatch(host, data)


def dispatch(host: SessionHost, data) -> dict | None:
    """Route one validated client input into the session's writer.

    Only View (and failures) produce a direct reply frame; everything else
    is acknowledged through the events it appends to the log.
    """
    engine = host.engine
    kind = data.kind
    try:
        with host.lock:
            if kind == "IngestText":
                engine.ingest_text(data.text)
            elif kind == "UpdateGaze":
                engine.update_gaze(tuple(data.origin), tuple(data.direction))
            elif kind == "GrabMove":
                engine.grab(data.balloon_id, tuple(data.position))
            elif kind == "ClickButton":
                if data.button == "View":
                    topic = engine.view_topic(data.balloon_id)
                    if topic is None:
                        return {"type": "error",
                                "reason": f"no topic {data.balloon_id!r}"}
                    return {
                        "type": "view",
                        "topic_key": topic.key,
                        "title": topic.title,
                        "sentences": topic.sentence_texts(),
                    }
                if data.button == "Delete":
                    engine.delete_balloon(data.balloon_id)
                elif data.button == "Add":
                    engine.begin_add(data.balloon_id)
                else:
                    engine.finish_add()
            elif kind == "Organize":
                engine.organize()
            elif kind == "StartSession":
                engine.start_session()
            elif kind == "StartRecording":
                engine.start_recording()
            elif kind == "StopRecording":
                engine.stop_recording()
            elif kind == "Play":
                engine.play(data.rate)
            else:
                return {"type": "error", "reason": f"unknown input kind {kind!r}"}
    except (EngineError, ValueError) as exc:
        return {"type": "error", "reason": str(exc)}
    if kind == "Play":
        host.start_playback_thread()
    return None
