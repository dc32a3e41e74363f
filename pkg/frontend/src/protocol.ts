// Wire types mirroring the server protocol (docs/protocol.md).

export interface SessionEvent {
  seq: number;
  t: number;
  kind: string;
  payload: Record<string, any>;
}

export type ServerFrame =
  | { type: "event"; event: SessionEvent }
  | { type: "view"; topic_key: string; title: string; sentences: string[] }
  | { type: "error"; reason: string }
  | { type: "ping" };

export type ClientInput =
  | { kind: "StartSession" }
  | { kind: "StartRecording" }
  | { kind: "StopRecording" }
  | { kind: "Play"; rate?: number }
  | { kind: "IngestText"; text: string }
  | { kind: "UpdateGaze"; origin: Vec3; direction: Vec3 }
  | { kind: "GrabMove"; balloon_id: string; position: Vec3 }
  | { kind: "ClickButton"; balloon_id: string; button: PanelButton }
  | { kind: "Organize" };

export type Vec3 = [number, number, number];

export type PanelButton = "View" | "Delete" | "Add" | "Finish";

// The four buttons every balloon panel offers, in display order.
export const PANEL_BUTTONS: readonly PanelButton[] = [
  "View",
  "Delete",
  "Add",
  "Finish",
];

export interface SnapshotResponse {
  id: string;
  phase: string;
  mode: string | null;
  last_seq: number;
  add_target: string | null;
  topics: {
    key: string;
    title: string;
    origin: string;
    created_at: number;
    word_count: number;
    sentences: [string, string][];
  }[];
  balloons: {
    topic_key: string;
    center: Vec3;
    radius: number;
    created_at: number;
    pinned: boolean;
    alpha: number;
  }[];
}
