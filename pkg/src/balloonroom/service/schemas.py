"""Pydantic wire schemas for the HTTP and stream endpoints."""

from __future__ import annotations

from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, Field

Vec3Model = tuple[float, float, float]


# -- HTTP ---------------------------------------------------------------------

class CreateSessionRequest(BaseModel):
    seed: int = 0
    config: dict[str, Any] = Field(default_factory=dict)


class CreateSessionResponse(BaseModel):
    id: str


class EventModel(BaseModel):
    seq: int
    t: float
    kind: str
    payload: dict[str, Any]


class EventsResponse(BaseModel):
    events: list[EventModel]


class TopicModel(BaseModel):
    key: str
    title: str
    origin: str
    created_at: float
    word_count: int
    sentences: list[tuple[str, str]]


class BalloonModel(BaseModel):
    topic_key: str
    center: Vec3Model
    radius: float
    created_at: float
    pinned: bool
    alpha: float


class SnapshotResponse(BaseModel):
    id: str
    phase: str
    mode: str | None
    last_seq: int
    add_target: str | None
    topics: list[TopicModel]
    balloons: list[BalloonModel]


class SaveRequest(BaseModel):
    path: str


class SaveResponse(BaseModel):
    path: str


# -- stream inputs -------------------------------------------------------------

class IngestTextInput(BaseModel):
    kind: Literal["IngestText"]
    text: str


class UpdateGazeInput(BaseModel):
    kind: Literal["UpdateGaze"]
    origin: Vec3Model
    direction: Vec3Model


class GrabMoveInput(BaseModel):
    kind: Literal["GrabMove"]
    balloon_id: str
    position: Vec3Model


class ClickButtonInput(BaseModel):
    kind: Literal["ClickButton"]
    balloon_id: str
    button: Literal["View", "Delete", "Add", "Finish"]


class OrganizeInput(BaseModel):
    kind: Literal["Organize"]


class StartSessionInput(BaseModel):
    kind: Literal["StartSession"]


class StartRecordingInput(BaseModel):
    kind: Literal["StartRecording"]


class StopRecordingInput(BaseModel):
    kind: Literal["StopRecording"]


class PlayInput(BaseModel):
    kind: Literal["Play"]
    rate: float = 1.0


ClientInput = Annotated[
    Union[
        IngestTextInput,
        UpdateGazeInput,
        GrabMoveInput,
        ClickButtonInput,
        OrganizeInput,
        StartSessionInput,
        StartRecordingInput,
        StopRecordingInput,
        PlayInput,
    ],
    Field(discriminator="kind"),
]
