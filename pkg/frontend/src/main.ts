import { Connection, createSession } from "./connection";
import { PANEL_BUTTONS } from "./protocol";
import type { PanelButton } from "./protocol";
import { BalloonScene } from "./scene3d";
import { ingestEvent, initialState } from "./sceneState";
import { SpeechInput } from "./speech";

const SERVER = (import.meta as any).env?.VITE_SERVER_URL ?? "http://localhost:8000";

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const statusEl = document.getElementById("status")!;
const warningsEl = document.getElementById("warnings")!;
const panelEl = document.getElementById("panel")!;
const transcriptEl = document.getElementById("transcript")!;
const textInput = document.getElementById("text-input") as HTMLInputElement;
const micButton = document.getElementById("mic") as HTMLButtonElement;

const state = initialState();
let connection: Connection | null = null;
let selectedBalloon: string | null = null;

const scene = new BalloonScene(canvas, {
  onBalloonClick: (id) => openPanel(id),
  onBalloonDrag: (id, position) =>
    connection?.send({ kind: "GrabMove", balloon_id: id, position }),
  onGaze: (origin, direction) =>
    connection?.send({ kind: "UpdateGaze", origin, direction }),
});

function setStatus(text: string): void {
  statusEl.textContent = text;
}

function refresh(): void {
  scene.sync(state);
  warningsEl.textContent = state.warnings.slice(-3).join(" | ");
  if (selectedBalloon && !state.balloons.has(selectedBalloon)) closePanel();
}

function openPanel(id: string): void {
  selectedBalloon = id;
  const balloon = state.balloons.get(id);
  if (!balloon) return;
  panelEl.innerHTML = "";
  const title = document.createElement("div");
  title.className = "panel-title";
  title.textContent = balloon.label;
  panelEl.appendChild(title);
  for (const button of PANEL_BUTTONS) {
    const el = document.createElement("button");
    el.textContent = button;
    el.onclick = () => clickButton(id, button);
    panelEl.appendChild(el);
  }
  panelEl.style.display = "block";
}

function closePanel(): void {
  selectedBalloon = null;
  panelEl.style.display = "none";
  transcriptEl.style.display = "none";
}

function clickButton(id: string, button: PanelButton): void {
  connection?.send({ kind: "ClickButton", balloon_id: id, button });
  if (button === "Finish" || button === "Delete") closePanel();
}

function sendText(text: string): void {
  const trimmed = text.trim();
  if (trimmed) connection?.send({ kind: "IngestText", text: trimmed });
}

const speech = new SpeechInput(sendText);
if (!speech.supported) {
  micButton.disabled = true;
  micButton.title = "Speech recognition unavailable; use the text box.";
}
let micOn = false;
micButton.onclick = () => {
  micOn = micOn ? (speech.stop(), false) : speech.start();
  micButton.textContent = micOn ? "mic: on" : "mic: off";
  if (!micOn && !speech.supported) setStatus("mic denied; text box still works");
};

textInput.addEventListener("keydown", (e) => {
  if (e.key === "Enter") {
    sendText(textInput.value);
    textInput.value = "";
  }
});

window.addEventListener("keydown", (e) => {
  if (e.key.toLowerCase() === "o" && document.activeElement !== textInput) {
    connection?.send({ kind: "Organize" });
  }
});

for (const [id, input] of [
  ["btn-start", { kind: "StartSession" }],
  ["btn-record", { kind: "StartRecording" }],
  ["btn-stop", { kind: "StopRecording" }],
  ["btn-play", { kind: "Play" }],
  ["btn-organize", { kind: "Organize" }],
] as const) {
  const el = document.getElementById(id) as HTMLButtonElement;
  el.onclick = () => connection?.send(input as any);
}

async function boot(): Promise<void> {
  setStatus("creating session...");
  try {
    const sessionId = await createSession(SERVER);
    connection = new Connection(SERVER, sessionId, {
      onEvent: (ev) => {
        const result = ingestEvent(state, ev);
        if (result === "applied") refresh();
        return result;
      },
      onView: (frame) => {
        transcriptEl.style.display = "block";
        transcriptEl.innerHTML = `<b>${frame.title}</b><br>` +
          frame.sentences.map((s) => `<div>- ${s}</div>`).join("");
      },
      onError: (reason) => setStatus(`error: ${reason}`),
      onStatus: (s) => setStatus(`${s} (session ${sessionId})`),
    });
    connection.connect(0);
  } catch (err) {
    setStatus(`cannot reach server at ${SERVER}: ${err}`);
  }
}

void boot();
