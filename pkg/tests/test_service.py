import json

import pytest
from fastapi.testclient import TestClient

from balloonroom.service import ServiceSettings, create_app


@pytest.fixture()
def client():
    app = create_app(ServiceSettings(provider_mode="rule", drift_ticker=False))
    with TestClient(app) as c:
        yield c


def make_session(client) -> str:
    resp = client.post("/sessions", json={"seed": 7})
    assert resp.status_code == 201
    return resp.json()["id"]


class TestHttp:
    def test_create_session(self, client):
        resp = client.post("/sessions", json={"seed": 1})
        assert resp.status_code == 201
        assert resp.json()["id"]

    def test_create_with_config_overrides(self, client):
        resp = client.post("/sessions", json={"seed": 1, "config": {"w_cap": 100}})
        assert resp.status_code == 201

    def test_bad_config_rejected(self, client):
        resp = client.post("/sessions", json={"config": {"r_min": 2.0}})
        assert resp.status_code == 400

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope").status_code == 404
        assert client.get("/sessions/nope/events").status_code == 404

    def test_snapshot_tracks_state(self, client):
        sid = make_session(client)
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            ws.send_text(json.dumps({"kind": "StartSession"}))
            ws.send_text(json.dumps({"kind": "IngestText", "text": "Create Rome"}))
            # read until we see the created balloon
            kinds = []
            while "BalloonCreated" not in kinds:
                frame = ws.receive_json()
                if frame["type"] == "event":
                    kinds.append(frame["event"]["kind"])
        snap = client.get(f"/sessions/{sid}").json()
        assert snap["phase"] == "Live"
        assert [t["key"] for t in snap["topics"]] == ["rome"]
        assert [b["topic_key"] for b in snap["balloons"]] == ["rome"]
        assert snap["last_seq"] >= 3

    def test_events_catch_up_since(self, client):
        sid = make_session(client)
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            ws.send_text(json.dumps({"kind": "StartSession"}))
            ws.send_text(json.dumps({"kind": "IngestText", "text": "Create Rome"}))
            frame = ws.receive_json()
            while frame["type"] != "event" or frame["event"]["kind"] != "BalloonCreated":
                frame = ws.receive_json()
        all_events = client.get(f"/sessions/{sid}/events").json()["events"]
        since_two = client.get(f"/sessions/{sid}/events", params={"since": 2}).json()["events"]
        assert [e["seq"] for e in all_events] == list(range(1, len(all_events) + 1))
        assert [e["seq"] for e in since_two] == [e["seq"] for e in all_events if e["seq"] > 2]

    def test_save_endpoint(self, client, tmp_path):
        sid = make_session(client)
        target = tmp_path / "saved.session.json"
        resp = client.post(f"/sessions/{sid}/save", json={"path": str(target)})
        assert resp.status_code == 200
        assert target.exists()
        doc = json.loads(target.read_text())
        assert doc["format_version"] == 1


class TestStream:
    def test_input_fans_out_to_all_subscribers(self, client):
        sid = make_session(client)
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws1, \
                client.websocket_connect(f"/sessions/{sid}/stream") as ws2:
            ws1.send_text(json.dumps({"kind": "StartSession"}))
            ws1.send_text(json.dumps({"kind": "IngestText", "text": "Create Rome"}))
            for ws in (ws1, ws2):
                kinds = []
                while "BalloonCreated" not in kinds:
                    frame = ws.receive_json()
                    if frame["type"] == "event":
                        kinds.append(frame["event"]["kind"])
                assert kinds == ["SessionStarted", "TimerStarted", "BalloonCreated"]

    def test_late_subscriber_catches_up_from_zero(self, client):
        sid = make_session(client)
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            ws.send_text(json.dumps({"kind": "StartSession"}))
            ws.send_text(json.dumps({"kind": "IngestText", "text": "Create Rome"}))
            seen = []
            while len(seen) < 3:
                frame = ws.receive_json()
                if frame["type"] == "event":
                    seen.append(frame["event"])
        with client.websocket_connect(f"/sessions/{sid}/stream?since=0") as late:
            caught_up = []
            while len(caught_up) < 3:
                frame = late.receive_json()
                if frame["type"] == "event":
                    caught_up.append(frame["event"])
        assert caught_up == seen  # same events, same order, exactly once

    def test_view_button_returns_sentences_without_events(self, client):
        sid = make_session(client)
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            ws.send_text(json.dumps({"kind": "StartSession"}))
            ws.send_text(json.dumps({"kind": "IngestText", "text": "Create Rome"}))
            while True:
                frame = ws.receive_json()
                if frame["type"] == "event" and frame["event"]["kind"] == "BalloonCreated":
                    break
            before = client.get(f"/sessions/{sid}/events").json()["events"]
            ws.send_text(json.dumps(
                {"kind": "ClickButton", "balloon_id": "rome", "button": "View"}))
            frame = ws.receive_json()
            assert frame["type"] == "view"
            assert frame["sentences"] == ["You created this balloon by voice command."]
            after = client.get(f"/sessions/{sid}/events").json()["events"]
            assert len(after) == len(before)  # view leaves the log unchanged

    def test_add_button_captures_next_segment(self, client):
        sid = make_session(client)
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            ws.send_text(json.dumps({"kind": "StartSession"}))
            ws.send_text(json.dumps({"kind": "IngestText", "text": "Create Rome"}))
            ws.send_text(json.dumps(
                {"kind": "ClickButton", "balloon_id": "rome", "button": "Add"}))
            ws.send_text(json.dumps({"kind": "IngestText", "text": "bring sunscreen"}))
            kinds = []
            while "BalloonGrown" not in kinds:
                frame = ws.receive_json()
                if frame["type"] == "event":
                    kinds.append(frame["event"]["kind"])
            assert "TranscriptAppended" in kinds
        snap = client.get(f"/sessions/{sid}").json()
        assert snap["topics"][0]["word_count"] == 7 + 2

    def test_gaze_normalized_server_side(self, client):
        sid = make_session(client)
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            ws.send_text(json.dumps({"kind": "StartSession"}))
            ws.send_text(json.dumps({
                "kind": "UpdateGaze",
                "origin": [3.0, 1.6, 3.0],
                "direction": [0.0, 0.0, -9.0],  # non-unit
            }))
            ws.send_text(json.dumps({"kind": "IngestText", "text": "Create Rome"}))
            while True:
                frame = ws.receive_json()
                if frame["type"] == "event" and frame["event"]["kind"] == "BalloonCreated":
                    z = frame["event"]["payload"]["position"][2]
                    break
            assert z < 3.0  # spawned along the normalized gaze

    def test_malformed_input_rejected_with_reason(self, client):
        sid = make_session(client)
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            ws.send_text(json.dumps({"kind": "DoesNotExist"}))
            frame = ws.receive_json()
            assert frame["type"] == "error"

    def test_illegal_transition_surfaces_as_error_frame(self, client):
        sid = make_session(client)
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            ws.send_text(json.dumps({"kind": "StopRecording"}))
            frame = ws.receive_json()
            assert frame["type"] == "error"
            assert "Idle" in frame["reason"]

    def test_unknown_session_stream_closes(self, client):
        with pytest.raises(Exception):
            with client.websocket_connect("/sessions/ghost/stream") as ws:
                ws.receive_json()

    def test_grab_move_broadcasts(self, client):
        sid = make_session(client)
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            ws.send_text(json.dumps({"kind": "StartSession"}))
            ws.send_text(json.dumps({"kind": "IngestText", "text": "Create Rome"}))
            while True:
                frame = ws.receive_json()
                if frame["type"] == "event" and frame["event"]["kind"] == "BalloonCreated":
                    break
            ws.send_text(json.dumps({
                "kind": "GrabMove", "balloon_id": "rome", "position": [2.0, 2.0, 2.0]}))
            while True:
                frame = ws.receive_json()
                if frame["type"] == "event" and frame["event"]["kind"] == "BalloonMoved":
                    payload = frame["event"]["payload"]
                    break
            assert payload["pinned"] is True
            assert payload["position"] == [2.0, 2.0, 2.0]


class TestLinearModeOverService:
    def test_record_then_play(self, client):
        sid = make_session(client)
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            ws.send_text(json.dumps({"kind": "StartRecording"}))
            ws.send_text(json.dumps({"kind": "IngestText", "text": "plan the big trip"}))
            ws.send_text(json.dumps({"kind": "StopRecording"}))
            ws.send_text(json.dumps({"kind": "Play", "rate": 1000.0}))
            kinds = []
            while "PlaybackFinished" not in kinds:
                frame = ws.receive_json()
                if frame["type"] == "event":
                    kinds.append(frame["event"]["kind"])
            assert "PlaybackStarted" in kinds
            assert "BalloonCreated" in kinds
        snap = client.get(f"/sessions/{sid}").json()
        assert snap["phase"] == "Done"
        assert snap["mode"] == "linear"
