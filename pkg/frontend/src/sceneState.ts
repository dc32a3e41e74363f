// Pure event-log reducer: the server log is the single source of truth and
// this module folds it into the scene model the renderer displays.
// Replaying events?since=0 after a reload reproduces the identical state.

import type { SessionEvent, Vec3 } from "./protocol";

export interface SceneBalloon {
  id: string; // topic key, doubles as balloon id
  label: string;
  origin: string;
  position: Vec3;
  radius: number;
  alpha: number;
  pinned: boolean;
  createdAt: number;
  sentences: string[];
}

export interface SceneState {
  balloons: Map<string, SceneBalloon>;
  lastSeq: number;
  mode: string | null;
  timerStartedAt: number | null;
  playing: boolean;
  playbackDone: boolean;
  organizedWall: string | null;
  warnings: string[];
}

export function initialState(): SceneState {
  return {
    balloons: new Map(),
    lastSeq: 0,
    mode: null,
    timerStartedAt: null,
    playing: false,
    playbackDone: false,
    organizedWall: null,
    warnings: [],
  };
}

export type IngestResult = "applied" | "stale" | "gap";

/** Apply one event in sequence; "gap" asks the caller to catch up first. */
export function ingestEvent(state: SceneState, ev: SessionEvent): IngestResult {
  if (ev.seq <= state.lastSeq) return "stale";
  if (ev.seq !== state.lastSeq + 1) return "gap";
  applyEvent(state, ev);
  return "applied";
}

function sentencesOf(payload: Record<string, any>): string[] {
  return ((payload.sentences ?? []) as [string, string][]).map(([, text]) => text);
}

export function applyEvent(state: SceneState, ev: SessionEvent): void {
  const p = ev.payload;
  switch (ev.kind) {
    case "SessionStarted":
      state.mode = p.mode ?? null;
      break;
    case "TimerStarted":
      state.timerStartedAt = ev.t;
      break;
    case "BalloonCreated": {
      state.balloons.set(p.topic_key, {
        id: p.topic_key,
        label: p.title,
        origin: p.origin,
        position: [...p.position] as Vec3,
        radius: p.radius,
        alpha: p.alpha ?? 0.4,
        pinned: false,
        createdAt: p.created_at,
        sentences: sentencesOf(p),
      });
      break;
    }
    case "TranscriptAppended": {
      const b = state.balloons.get(p.topic_key);
      if (b) b.sentences.push(...sentencesOf(p));
      break;
    }
    case "BalloonGrown": {
      const b = state.balloons.get(p.topic_key);
      if (b) b.radius = p.radius;
      break;
    }
    case "BalloonMoved": {
      const b = state.balloons.get(p.topic_key);
      if (b) {
        b.position = [...p.position] as Vec3;
        b.pinned = p.pinned;
      }
      break;
    }
    case "BalloonDeleted":
      state.balloons.delete(p.topic_key);
      break;
    case "TopicRenamed": {
      const b = state.balloons.get(p.old_key);
      if (b) {
        state.balloons.delete(p.old_key);
        b.id = p.new_key;
        b.label = p.title;
        state.balloons.set(p.new_key, b);
      }
      break;
    }
    case "TopicsMerged": {
      const src = state.balloons.get(p.source_key);
      const dst = state.balloons.get(p.target_key);
      if (dst) {
        dst.sentences.push(...((p.moved ?? []) as [string, string][]).map(([, s]) => s));
        dst.radius = p.radius;
      }
      if (src) state.balloons.delete(p.source_key);
      break;
    }
    case "SuggestionAdded":
      break; // the paired BalloonCreated carries the state
    case "OrganizeApplied":
      state.organizedWall = p.wall;
      break;
    case "PlaybackStarted":
      state.playing = true;
      break;
    case "PlaybackFinished":
      state.playing = false;
      state.playbackDone = true;
      break;
    case "Warning":
      state.warnings.push(p.message ?? p.code ?? "warning");
      break;
    default:
      break; // unknown kinds are forward-compatible no-ops
  }
  state.lastSeq = ev.seq;
}

export function foldEvents(events: SessionEvent[]): SceneState {
  const state = initialState();
  for (const ev of events) applyEvent(state, ev);
  if (events.length) state.lastSeq = events[events.length - 1].seq;
  return state;
}
