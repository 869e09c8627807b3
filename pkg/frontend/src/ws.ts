/**
 * The single WebSocket to the manager's operator gateway.
 *
 * Events are handed to the caller in arrival order; on any disconnect the
 * client keeps retrying, and the gateway's snapshot-on-connect gives a
 * full resync when the link comes back. The socket constructor is
 * injectable so the protocol logic can be exercised without a server.
 */
import type { UiEvent, VsoCommand } from "./types.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  readyState: number;
}

export interface GatewayHandlers {
  onEvent(event: UiEvent): void;
  onStatus(connected: boolean): void;
}

const SOCKET_OPEN = 1;
const RETRY_MS = 1000;

export class GatewayClient {
  private socket: SocketLike | null = null;
  private retry: ReturnType<typeof setTimeout> | null = null;
  private closed = false;

  constructor(
    readonly url: string,
    private readonly handlers: GatewayHandlers,
    private readonly makeSocket: (url: string) => SocketLike = (u) =>
      new WebSocket(u) as unknown as SocketLike,
  ) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  private open(): void {
    let socket: SocketLike;
    try {
      socket = this.makeSocket(this.url);
    } catch {
      this.scheduleRetry();
      return;
    }
    this.socket = socket;
    socket.onopen = () => this.handlers.onStatus(true);
    socket.onmessage = (ev) => {
      let event: UiEvent;
      try {
        event = JSON.parse(String(ev.data)) as UiEvent;
      } catch {
        return; // not JSON, not ours
      }
      this.handlers.onEvent(event);
    };
    socket.onerror = () => socket.close();
    socket.onclose = () => {
      if (this.socket === socket) {
        this.socket = null;
        this.handlers.onStatus(false);
        this.scheduleRetry();
      }
    };
  }

  private scheduleRetry(): void {
    if (this.closed || this.retry !== null) {
      return;
    }
    this.retry = setTimeout(() => {
      this.retry = null;
      if (!this.closed) {
        this.open();
      }
    }, RETRY_MS);
  }

  /** Post one command; false when the link is down (caller leaves state alone). */
  send(cmd: VsoCommand): boolean {
    if (this.socket === null || this.socket.readyState !== SOCKET_OPEN) {
      return false;
    }
    this.socket.send(JSON.stringify(cmd));
    return true;
  }

  close(): void {
    this.closed = true;
    if (this.retry !== null) {
      clearTimeout(this.retry);
      this.retry = null;
    }
    const socket = this.socket;
    this.socket = null;
    if (socket !== null) {
      socket.close();
    }
  }
}

/** Gateway address: ?ws=… override, else the gateway's default port. */
export function gatewayUrl(location: { search: string; hostname: string }): string {
  const override = new URLSearchParams(location.search).get("ws");
  if (override !== null && override !== "") {
    return override;
  }
  const host = location.hostname === "" ? "127.0.0.1" : location.hostname;
  return `ws://${host}:8080`;
}
