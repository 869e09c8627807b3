/**
 * Browser entry point: one reducer-held state, one socket, full redraw on
 * every event. Commands leave through explicit button and form gestures
 * only, and nothing is shown as done until the gateway says so.
 */
import { applyEvent, initialState } from "./state.js";
import { renderPanels } from "./render.js";
import { GatewayClient, gatewayUrl } from "./ws.js";
import type { UiState, VsoCommand } from "./types.js";

let state: UiState = initialState();
let connected = false;

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app element");
}

function redraw(): void {
  root!.innerHTML = renderPanels(state, connected);
}

const client = new GatewayClient(gatewayUrl(window.location), {
  onEvent: (event) => {
    state = applyEvent(state, event);
    redraw();
  },
  onStatus: (ok) => {
    connected = ok;
    redraw();
  },
});

root.addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement | null;
  const button = target?.closest<HTMLElement>("[data-cmd]") ?? null;
  if (button === null || button.hasAttribute("disabled")) {
    return;
  }
  client.send(JSON.parse(button.getAttribute("data-cmd")!) as VsoCommand);
});

root.addEventListener("submit", (ev) => {
  const form = ev.target as HTMLFormElement;
  ev.preventDefault();
  if (!connected) {
    return;
  }
  const fields = new FormData(form);
  const text = (name: string) => String(fields.get(name) ?? "").trim();
  const seconds = (name: string, fallbackMs: number) => {
    const raw = text(name);
    return raw === "" ? fallbackMs : Math.round(Number(raw) * 1000);
  };
  const kind = form.getAttribute("data-form");
  if (kind === "create-close") {
    client.send({
      command: "CreateCloseOrder",
      pad: text("pad"),
      start_ms: seconds("start_s", state.simTimeMs),
      duration_ms: seconds("duration_s", 0),
      detail: text("detail"),
    });
  } else if (kind === "reassign") {
    client.send({
      command: "ReassignSlot",
      callsign: text("callsign"),
      pad: text("pad"),
      start_ms: seconds("start_s", state.simTimeMs),
    });
  }
});

redraw();
client.connect();
