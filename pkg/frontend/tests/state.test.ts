import { describe, expect, it } from "vitest";

import { applyEvent, initialState } from "../src/state.js";
import type { Snapshot, UiEvent, UiState } from "../src/types.js";

function snapshotEvent(): Snapshot {
  return {
    event: "snapshot",
    vertidrome: "VD_TEST",
    sim_time_ms: 1500,
    sector: [
      { pad: "PAD_A", callsign: "UAV1", azimuth_deg: 240, distance_m: 15, rel_altitude_m: 91 },
    ],
    pads: [
      { pad: "PAD_A", status: "CLEAR", mode: "BOTH", cause: null, pending_close_ms: null },
    ],
    weather: { direction_deg: 60, speed_ms: 3 },
    popups: [
      { popup_id: 7, kind: "notice", text: "hello", request_id: "", callsign: "" },
    ],
    close_orders: [],
    forecast: { generated_at_ms: 0, rows: [] },
    alerts: [],
  };
}

function deepFreeze<T>(value: T): T {
  if (value !== null && typeof value === "object") {
    for (const key of Object.keys(value)) {
      deepFreeze((value as Record<string, unknown>)[key]);
    }
    Object.freeze(value);
  }
  return value;
}

describe("applyEvent", () => {
  it("replaces the whole state on snapshot", () => {
    const state = applyEvent(initialState(), snapshotEvent());
    expect(state.vertidrome).toBe("VD_TEST");
    expect(state.simTimeMs).toBe(1500);
    expect(state.sector).toHaveLength(1);
    expect(state.popups.map((p) => p.popup_id)).toEqual([7]);
    expect(state.weather).toEqual({ direction_deg: 60, speed_ms: 3 });
  });

  it("never mutates its input", () => {
    const state = deepFreeze(applyEvent(initialState(), snapshotEvent()));
    const next = applyEvent(state, { event: "clock", sim_time_ms: 2000 });
    expect(next).not.toBe(state);
    expect(next.simTimeMs).toBe(2000);
    expect(state.simTimeMs).toBe(1500);
  });

  it("updates exactly the panel a diff event names", () => {
    const state = applyEvent(initialState(), snapshotEvent());
    const next = applyEvent(state, {
      event: "weather",
      direction_deg: 120,
      speed_ms: 7.5,
    });
    expect(next.weather).toEqual({ direction_deg: 120, speed_ms: 7.5 });
    expect(next.sector).toBe(state.sector);
    expect(next.pads).toBe(state.pads);
    expect(next.popups).toBe(state.popups);
  });

  it("queues pop-ups oldest first", () => {
    let state = applyEvent(initialState(), snapshotEvent());
    state = applyEvent(state, {
      event: "popup",
      popup: { popup_id: 8, kind: "hazard", text: "later", request_id: "", callsign: "" },
    });
    expect(state.popups.map((p) => p.popup_id)).toEqual([7, 8]);
  });

  it("drops a pop-up only when the gateway clears it", () => {
    let state = applyEvent(initialState(), snapshotEvent());
    // nothing the console does locally removes the pop-up; only the
    // cleared event for that exact id does
    state = applyEvent(state, { event: "command-result", ok: true, reason: "" });
    expect(state.popups).toHaveLength(1);
    state = applyEvent(state, { event: "popup-cleared", popup_id: 99 });
    expect(state.popups).toHaveLength(1);
    state = applyEvent(state, { event: "popup-cleared", popup_id: 7 });
    expect(state.popups).toHaveLength(0);
  });

  it("keeps recorder metadata out of alert entries", () => {
    const stamped = {
      event: "alert",
      sim_time_ms: 4000,
      callsign: "UAV1",
      kind: "lateral",
      detail: "5.2 over a limit of 5.0",
    } as unknown as UiEvent;
    const state = applyEvent(applyEvent(initialState(), snapshotEvent()), stamped);
    expect(state.alerts).toEqual([
      { callsign: "UAV1", kind: "lateral", detail: "5.2 over a limit of 5.0" },
    ]);
  });

  it("stores the latest command result", () => {
    const state = applyEvent(initialState(), {
      event: "command-result",
      command: "ReassignSlot",
      ok: false,
      reason: "window occupied",
    });
    expect(state.lastResult).toEqual({
      command: "ReassignSlot",
      ok: false,
      reason: "window occupied",
    });
  });

  it("ignores event kinds it does not know", () => {
    const state: UiState = applyEvent(initialState(), snapshotEvent());
    const unknown = { event: "espresso-ready", strength: 9 } as unknown as UiEvent;
    expect(applyEvent(state, unknown)).toBe(state);
  });
});
