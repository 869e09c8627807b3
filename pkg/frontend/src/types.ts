/**
 * Wire protocol with the vertidrome manager's operator gateway, and the
 * console's view state derived from it.
 *
 * The gateway sends one full snapshot when a connection opens, then
 * incremental panel events, all as JSON text frames. The console sends
 * command objects and never mutates its own state in response; every
 * visible change comes back as a gateway event.
 */

export interface SectorRow {
  pad: string;
  callsign: string;
  azimuth_deg: number;
  distance_m: number;
  rel_altitude_m: number;
}

export interface PadRow {
  pad: string;
  status: "CLEAR" | "CLOSED";
  mode: "ARR" | "DEP" | "BOTH" | "NONE";
  cause: string | null;
  pending_close_ms: number | null;
}

export interface Weather {
  direction_deg: number;
  speed_ms: number;
}

export interface Popup {
  popup_id: number;
  kind: string; // flight-request | notice | hazard | alert
  text: string;
  request_id: string;
  callsign: string;
}

export interface CloseOrderRow {
  order_id: number;
  pad: string;
  start_ms: number;
  duration_ms: number; // 0 = open-ended, stays until cleared
  cause: string;
  detail: string;
}

export interface ForecastCell {
  callsign: string;
  aircraft: string;
  priority: number;
  operation: string;
  route: string;
  status: string;
}

export interface ForecastRow {
  minute_ms: number;
  cells: Record<string, ForecastCell | null>;
}

export interface ForecastGrid {
  generated_at_ms: number;
  rows: ForecastRow[];
}

export interface Alert {
  callsign: string;
  kind: string;
  detail: string;
}

export interface CommandResult {
  command?: string | null;
  ok: boolean;
  reason: string;
}

export interface Snapshot {
  event: "snapshot";
  vertidrome: string;
  sim_time_ms: number;
  sector: SectorRow[];
  pads: PadRow[];
  weather: Weather;
  popups: Popup[];
  close_orders: CloseOrderRow[];
  forecast: ForecastGrid;
  alerts: Alert[];
}

export type UiEvent =
  | Snapshot
  | { event: "clock"; sim_time_ms: number }
  | ({ event: "weather" } & Weather)
  | { event: "pads"; rows: PadRow[] }
  | { event: "sector"; rows: SectorRow[] }
  | { event: "close-orders"; rows: CloseOrderRow[] }
  | ({ event: "forecast" } & ForecastGrid)
  | { event: "popup"; popup: Popup }
  | { event: "popup-cleared"; popup_id: number }
  | ({ event: "alert" } & Alert)
  | ({ event: "command-result" } & CommandResult);

export type VsoCommand =
  | { command: "AcknowledgeRequest"; popup_id: number }
  | { command: "ApproveFlight"; request_id: string }
  | { command: "CancelFlight"; request_id: string }
  | {
      command: "CreateCloseOrder";
      pad: string;
      start_ms: number;
      duration_ms: number;
      detail: string;
    }
  | { command: "ClearCloseOrder"; order_id: number }
  | { command: "ReassignSlot"; callsign: string; pad: string; start_ms: number };

/**
 * Everything the panels show. A pure projection of the gateway stream:
 * no field is authoritative, and none is written except by applyEvent.
 */
export interface UiState {
  vertidrome: string;
  simTimeMs: number;
  sector: SectorRow[];
  pads: PadRow[];
  weather: Weather;
  /** Oldest first; the head is the pop-up on screen. */
  popups: Popup[];
  closeOrders: CloseOrderRow[];
  forecast: ForecastGrid;
  alerts: Alert[];
  lastResult: CommandResult | null;
}
