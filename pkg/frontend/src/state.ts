import type { UiEvent, UiState } from "./types.js";

export function initialState(): UiState {
  return {
    vertidrome: "",
    simTimeMs: 0,
    sector: [],
    pads: [],
    weather: { direction_deg: 0, speed_ms: 0 },
    popups: [],
    closeOrders: [],
    forecast: { generated_at_ms: 0, rows: [] },
    alerts: [],
    lastResult: null,
  };
}

/**
 * Fold one gateway event into the view state.
 *
 * Pure: the input state is never mutated, so callers can compare by
 * identity to decide whether to redraw. Fields are copied explicitly
 * rather than spread from the event, because recorded streams stamp
 * extra metadata keys onto each frame and those must not leak into the
 * state. Unknown event kinds are ignored (same state back), which keeps
 * old consoles working against a gateway that has grown new panels.
 */
export function applyEvent(state: UiState, event: UiEvent): UiState {
  switch (event.event) {
    case "snapshot":
      return {
        vertidrome: event.vertidrome,
        simTimeMs: event.sim_time_ms,
        sector: event.sector,
        pads: event.pads,
        weather: {
          direction_deg: event.weather.direction_deg,
          speed_ms: event.weather.speed_ms,
        },
        popups: event.popups,
        closeOrders: event.close_orders,
        forecast: event.forecast,
        alerts: event.alerts,
        lastResult: null,
      };
    case "clock":
      return { ...state, simTimeMs: event.sim_time_ms };
    case "weather":
      return {
        ...state,
        weather: {
          direction_deg: event.direction_deg,
          speed_ms: event.speed_ms,
        },
      };
    case "pads":
      return { ...state, pads: event.rows };
    case "sector":
      return { ...state, sector: event.rows };
    case "close-orders":
      return { ...state, closeOrders: event.rows };
    case "forecast":
      return {
        ...state,
        forecast: {
          generated_at_ms: event.generated_at_ms,
          rows: event.rows,
        },
      };
    case "popup":
      // queue behind whatever is already pending, oldest stays on screen
      return { ...state, popups: [...state.popups, event.popup] };
    case "popup-cleared":
      return {
        ...state,
        popups: state.popups.filter((p) => p.popup_id !== event.popup_id),
      };
    case "alert":
      return {
        ...state,
        alerts: [
          ...state.alerts,
          { callsign: event.callsign, kind: event.kind, detail: event.detail },
        ],
      };
    case "command-result":
      return {
        ...state,
        lastResult: {
          command: event.command ?? null,
          ok: event.ok,
          reason: event.reason,
        },
      };
    default:
      return state;
  }
}
