// WebSocket client with sequence tracking and catch-up on gaps or reconnect.

import type { ClientInput, ServerFrame, SessionEvent } from "./protocol";

export interface ConnectionCallbacks {
  onEvent: (ev: SessionEvent) => "applied" | "stale" | "gap";
  onView?: (frame: { topic_key: string; title: string; sentences: string[] }) => void;
  onError?: (reason: string) => void;
  onStatus?: (status: string) => void;
}

export class Connection {
  private ws: WebSocket | null = null;
  private lastSeq = 0;
  private closed = false;

  constructor(
    private baseUrl: string, // e.g. http://localhost:8000
    private sessionId: string,
    private callbacks: ConnectionCallbacks,
  ) {}

  connect(since = 0): void {
    this.lastSeq = since;
    const wsUrl = this.baseUrl.replace(/^http/, "ws");
    this.ws = new WebSocket(
      `${wsUrl}/sessions/${this.sessionId}/stream?since=${this.lastSeq}`,
    );
    this.ws.onopen = () => this.callbacks.onStatus?.("connected");
    this.ws.onclose = () => {
      this.callbacks.onStatus?.("disconnected");
      if (!this.closed) setTimeout(() => this.connect(this.lastSeq), 1000);
    };
    this.ws.onmessage = (msg) => this.handle(JSON.parse(msg.data as string));
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }

  send(input: ClientInput): void {
    if (this.ws?.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(input));
    }
  }

  private handle(frame: ServerFrame): void {
    switch (frame.type) {
      case "event": {
        const result = this.callbacks.onEvent(frame.event);
        if (result === "applied") {
          this.lastSeq = frame.event.seq;
        } else if (result === "gap") {
          // Missed something: re-fetch the tail over HTTP, then resume.
          void this.catchUp();
        }
        break;
      }
      case "view":
        this.callbacks.onView?.(frame);
        break;
      case "error":
        this.callbacks.onError?.(frame.reason);
        break;
      case "ping":
        break;
    }
  }

  async catchUp(): Promise<void> {
    const resp = await fetch(
      `${this.baseUrl}/sessions/${this.sessionId}/events?since=${this.lastSeq}`,
    );
    const body = (await resp.json()) as { events: SessionEvent[] };
    for (const ev of body.events) {
      if (this.callbacks.onEvent(ev) === "applied") this.lastSeq = ev.seq;
    }
  }
}

export async function createSession(baseUrl: string, seed = 0): Promise<string> {
  const resp = await fetch(`${baseUrl}/sessions`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ seed }),
  });
  if (!resp.ok) throw new Error(`create session failed: ${resp.status}`);
  const body = (await resp.json()) as { id: string };
  return body.id;
}
