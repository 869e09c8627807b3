/**
 * Pure view builders: UiState in, strings out. Nothing in this module
 * touches the DOM or the socket, so every panel the operator sees can be
 * asserted on in tests. main.ts injects the HTML and wires the gestures.
 */
import type {
  CloseOrderRow,
  ForecastCell,
  ForecastGrid,
  PadRow,
  Popup,
  SectorRow,
  UiState,
  VsoCommand,
  Weather,
} from "./types.js";

export const FORECAST_ROW_COUNT = 11;

const BLANK_CELL: ForecastCell = {
  callsign: "",
  aircraft: "",
  priority: 0,
  operation: "",
  route: "",
  status: "",
};

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Simulated time as a signed HH:MM:SS label. */
export function clockText(ms: number): string {
  const sign = ms < 0 ? "-" : "";
  const total = Math.floor(Math.abs(ms) / 1000);
  const h = Math.floor(total / 3600);
  const m = Math.floor((total % 3600) / 60);
  const s = total % 60;
  const two = (n: number) => String(n).padStart(2, "0");
  return `${sign}${two(h)}:${two(m)}:${two(s)}`;
}

/** The weather panel line, e.g. "Direction: 060° Speed: 3 m/s". */
export function weatherText(weather: Weather): string {
  const deg = String(Math.round(weather.direction_deg)).padStart(3, "0");
  return `Direction: ${deg}° Speed: ${String(weather.speed_ms)} m/s`;
}

/** One sector table row; the numbers arrive as integers and stay that way. */
export function sectorCells(row: SectorRow): string[] {
  return [
    row.pad,
    row.callsign,
    String(row.azimuth_deg),
    String(row.distance_m),
    String(row.rel_altitude_m),
  ];
}

export function padCells(row: PadRow): string[] {
  return [
    row.pad,
    row.status,
    row.mode,
    row.cause ?? "",
    row.pending_close_ms === null
      ? ""
      : `closes at ${clockText(row.pending_close_ms)}`,
  ];
}

export function closeOrderCells(order: CloseOrderRow): string[] {
  const until =
    order.duration_ms > 0
      ? `until ${clockText(order.start_ms + order.duration_ms)}`
      : "until cleared";
  return [
    `#${order.order_id}`,
    order.pad,
    `from ${clockText(order.start_ms)} ${until}`,
    order.cause,
    order.detail,
  ];
}

export interface ForecastView {
  pads: string[];
  rows: { label: string; cells: ForecastCell[] }[];
}

/**
 * The last grid the gateway pushed, padded out so the panel always shows
 * a full table: with nothing received yet there are still 11 rows of
 * blank cells at priority 0.
 */
export function forecastView(grid: ForecastGrid, padIds: string[] = []): ForecastView {
  const first = grid.rows[0];
  const pads =
    first !== undefined ? Object.keys(first.cells).sort() : [...padIds].sort();
  const rows = grid.rows.map((row) => ({
    label: clockText(row.minute_ms),
    cells: pads.map((pad) => row.cells[pad] ?? BLANK_CELL),
  }));
  while (rows.length < FORECAST_ROW_COUNT) {
    rows.push({ label: "", cells: pads.map(() => BLANK_CELL) });
  }
  return { pads, rows };
}

export function forecastCellText(cell: ForecastCell): string {
  const flight = [cell.callsign, cell.aircraft, cell.operation, cell.route]
    .filter((part) => part !== "")
    .join(" ");
  const tail = cell.status === "" ? `p${cell.priority}` : `p${cell.priority} ${cell.status}`;
  return flight === "" ? tail : `${flight} ${tail}`;
}

function commandButton(
  label: string,
  cmd: VsoCommand,
  enabled: boolean,
  extraClass = "",
): string {
  const attr = escapeHtml(JSON.stringify(cmd));
  const cls = extraClass === "" ? "" : ` class="${extraClass}"`;
  return `<button${cls} data-cmd="${attr}"${enabled ? "" : " disabled"}>${escapeHtml(label)}</button>`;
}

function tableHtml(headers: string[], rows: string[][], empty: string): string {
  const head = headers.map((h) => `<th>${escapeHtml(h)}</th>`).join("");
  if (rows.length === 0) {
    return (
      `<table><thead><tr>${head}</tr></thead>` +
      `<tbody><tr><td class="empty" colspan="${headers.length}">${escapeHtml(empty)}</td></tr></tbody></table>`
    );
  }
  const body = rows
    .map(
      (cells) =>
        `<tr>${cells.map((c) => `<td>${escapeHtml(c)}</td>`).join("")}</tr>`,
    )
    .join("");
  return `<table><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

function popupHtml(popups: Popup[], enabled: boolean): string {
  const popup = popups[0];
  if (popup === undefined) {
    return "";
  }
  const queued =
    popups.length > 1 ? `<p class="queued">+${popups.length - 1} queued</p>` : "";
  let buttons: string;
  if (popup.kind === "flight-request" && popup.request_id !== "") {
    buttons =
      commandButton(
        "Approve",
        { command: "ApproveFlight", request_id: popup.request_id },
        enabled,
        "approve",
      ) +
      commandButton(
        "Reject",
        { command: "CancelFlight", request_id: popup.request_id },
        enabled,
        "reject",
      );
  } else {
    buttons = commandButton(
      "OK",
      { command: "AcknowledgeRequest", popup_id: popup.popup_id },
      enabled,
    );
  }
  return (
    `<div class="popup-layer"><div class="popup popup-${escapeHtml(popup.kind)}">` +
    `<p class="popup-kind">${escapeHtml(popup.kind)}</p>` +
    `<p class="popup-text">${escapeHtml(popup.text)}</p>` +
    `<div class="popup-buttons">${buttons}</div>${queued}</div></div>`
  );
}

function padControlHtml(state: UiState, enabled: boolean): string {
  const orders = state.closeOrders.map((order) => {
    const cells = closeOrderCells(order)
      .map((c) => `<td>${escapeHtml(c)}</td>`)
      .join("");
    const clear = commandButton(
      "Clear",
      { command: "ClearCloseOrder", order_id: order.order_id },
      enabled,
    );
    return `<tr>${cells}<td>${clear}</td></tr>`;
  });
  const ordersTable =
    orders.length === 0
      ? `<p class="empty">no close orders</p>`
      : `<table><thead><tr><th>Order</th><th>Pad</th><th>Window</th>` +
        `<th>Cause</th><th>Detail</th><th></th></tr></thead>` +
        `<tbody>${orders.join("")}</tbody></table>`;
  const padOptions = state.pads
    .map((p) => `<option value="${escapeHtml(p.pad)}">${escapeHtml(p.pad)}</option>`)
    .join("");
  const dis = enabled ? "" : " disabled";
  return (
    `<h3>Existing Close Orders</h3>${ordersTable}` +
    `<h3>Create new close order</h3>` +
    `<form data-form="create-close">` +
    `<label>Pad <select name="pad"${dis}>${padOptions}</select></label>` +
    `<label>Start s <input name="start_s" type="number" min="0" placeholder="now"${dis}></label>` +
    `<label>Duration s <input name="duration_s" type="number" min="0" value="0"${dis}></label>` +
    `<label>Detail <input name="detail" type="text"${dis}></label>` +
    `<button type="submit"${dis}>Close pad</button>` +
    `</form>` +
    `<h3>Slot Reassignment</h3>` +
    `<form data-form="reassign">` +
    `<label>Flight <input name="callsign" type="text"${dis}></label>` +
    `<label>Pad <select name="pad"${dis}>${padOptions}</select></label>` +
    `<label>Start s <input name="start_s" type="number" min="0"${dis}></label>` +
    `<button type="submit"${dis}>Reassign</button>` +
    `<button type="reset"${dis}>Reset</button>` +
    `</form>`
  );
}

function resultHtml(state: UiState): string {
  if (state.lastResult === null) {
    return "";
  }
  const name = state.lastResult.command ?? "command";
  if (state.lastResult.ok) {
    return `<p class="result ok">${escapeHtml(name)}: ok</p>`;
  }
  return `<p class="result rejected">${escapeHtml(name)} rejected: ${escapeHtml(state.lastResult.reason)}</p>`;
}

/** The whole console as one HTML string. */
export function renderPanels(state: UiState, connected: boolean): string {
  const banner = connected
    ? ""
    : `<span class="banner">STALE DATA (reconnecting)</span>`;
  const forecast = forecastView(
    state.forecast,
    state.pads.map((p) => p.pad),
  );
  const forecastRows = forecast.rows.map((row) => [
    row.label,
    ...row.cells.map(forecastCellText),
  ]);
  const alertRows = state.alerts.map((a) => [a.callsign, a.kind, a.detail]);
  return (
    `<header class="topbar${connected ? "" : " stale"}">` +
    `<span class="vd">${escapeHtml(state.vertidrome || "(no vertidrome)")}</span>` +
    `<span class="clock">T ${clockText(state.simTimeMs)}</span>${banner}</header>` +
    popupHtml(state.popups, connected) +
    `<main class="panels">` +
    `<section id="sector"><h2>Aircraft in Sector</h2>` +
    tableHtml(
      ["Pad", "Flight", "Azimuth °", "Distance m", "Rel. altitude m"],
      state.sector.map(sectorCells),
      "no traffic in sector",
    ) +
    `</section>` +
    `<section id="pads"><h2>Pad Status</h2>` +
    tableHtml(
      ["Pad", "Status", "Mode", "Cause", "Pending change"],
      state.pads.map(padCells),
      "no pads",
    ) +
    `</section>` +
    `<section id="weather"><h2>Current Weather Information</h2>` +
    `<p class="weather">${escapeHtml(weatherText(state.weather))}</p></section>` +
    `<section id="pad-control"><h2>Pad Control</h2>` +
    padControlHtml(state, connected) +
    `</section>` +
    `<section id="forecast"><h2>Operational Forecast</h2>` +
    tableHtml(["Time", ...forecast.pads], forecastRows, "") +
    `</section>` +
    `<section id="alerts"><h2>Deviation Alerts</h2>` +
    tableHtml(["Flight", "Kind", "Detail"], alertRows, "none") +
    `</section>` +
    `</main>` +
    resultHtml(state)
  );
}
