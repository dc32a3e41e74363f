#!/usr/bin/env python3
"""Regenerate frontend/tests/fixtures/golden_session.json from the engine.

The frontend's conformance test folds this event log and must land on the
snapshot recorded here; rerun this after any change to event payloads.
"""

import json
from pathlib import Path

from balloonroom.model import RoomConfig, TranscriptSegment
from balloonroom.providers import ScriptedProvider
from balloonroom.session import Engine, FakeClock

EXTRACT = {
    "plan the route north": "TOPIC: Route\nSENT: plan the route north",
    "count the budget twice": "TOPIC: Budget\nSENT: count the budget twice",
    "route snacks and water": "TOPIC: Route\nSENT: route snacks and water",
    "colors of the harbor": "TOPIC: Colors\nSENT: colors of the harbor",
    "color of the evening": "TOPIC: Color\nSENT: color of the evening",
}
EXPAND = {"Route": "TOPIC: Maps\nTOPIC: Fuel"}

SEGMENTS = [
    "plan the route north",
    "count the budget twice",
    "route snacks and water",
    "colors of the harbor",
    "color of the evening",
    "Merge Colors into Color",
    "Expand Route",
    "Delete Fuel",
    "Change Budget into Money",
]


def main() -> None:
    clock = FakeClock()
    engine = Engine(
        cfg=RoomConfig(rng_seed=31),
        clock=clock,
        provider=ScriptedProvider(extract=EXTRACT, expand=EXPAND),
    )
    engine.start_session()
    for i, text in enumerate(SEGMENTS):
        t = float(i + 1)
        clock.advance_to(t)
        engine.handle_segment(
            TranscriptSegment(id=f"s{i}", text=text, t_start=t, t_end=t)
        )
    clock.advance_to(40.0)
    engine.tick()
    engine.grab("maps", (2.0, 1.8, 2.0))
    engine.organize()

    doc = {
        "events": [e.to_json() for e in engine.log.events],
        "snapshot": {
            "topics": engine.topics.to_json(),
            "balloons": engine.layout.snapshot(),
        },
    }
    out = (Path(__file__).resolve().parent.parent
           / "frontend" / "tests" / "fixtures" / "golden_session.json")
    out.write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
    print(f"wrote {out} ({len(doc['events'])} events, "
          f"{len(doc['snapshot']['balloons'])} balloons)")


if __name__ == "__main__":
    main()
