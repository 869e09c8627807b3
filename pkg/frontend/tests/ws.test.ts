import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { GatewayClient, gatewayUrl, type SocketLike } from "../src/ws.js";
import type { UiEvent } from "../src/types.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  readyState = 0;
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.readyState = 3;
    this.onclose?.();
  }

  open(): void {
    this.readyState = 1;
    this.onopen?.();
  }

  receive(frame: string): void {
    this.onmessage?.({ data: frame });
  }
}

describe("gatewayUrl", () => {
  it("defaults to the gateway port on the page's host", () => {
    expect(gatewayUrl({ search: "", hostname: "console.local" })).toBe(
      "ws://console.local:8080",
    );
    expect(gatewayUrl({ search: "", hostname: "" })).toBe("ws://127.0.0.1:8080");
  });

  it("honours the ?ws= override", () => {
    expect(
      gatewayUrl({ search: "?ws=ws://10.0.0.5:9001", hostname: "x" }),
    ).toBe("ws://10.0.0.5:9001");
  });
});

describe("GatewayClient", () => {
  let sockets: FakeSocket[];
  let events: UiEvent[];
  let statuses: boolean[];
  let client: GatewayClient;

  beforeEach(() => {
    vi.useFakeTimers();
    sockets = [];
    events = [];
    statuses = [];
    client = new GatewayClient(
      "ws://test:1",
      {
        onEvent: (ev) => events.push(ev),
        onStatus: (ok) => statuses.push(ok),
      },
      () => {
        const socket = new FakeSocket();
        sockets.push(socket);
        return socket;
      },
    );
  });

  afterEach(() => {
    client.close();
    vi.useRealTimers();
  });

  it("reports the link and hands events over in order", () => {
    client.connect();
    sockets[0]!.open();
    expect(statuses).toEqual([true]);
    sockets[0]!.receive('{"event":"clock","sim_time_ms":500}');
    sockets[0]!.receive('{"event":"clock","sim_time_ms":1000}');
    expect(events.map((e) => (e as { sim_time_ms: number }).sim_time_ms)).toEqual([
      500, 1000,
    ]);
  });

  it("ignores frames that are not JSON", () => {
    client.connect();
    sockets[0]!.open();
    sockets[0]!.receive("not json");
    expect(events).toEqual([]);
  });

  it("refuses to send while the link is down", () => {
    client.connect();
    expect(client.send({ command: "AcknowledgeRequest", popup_id: 1 })).toBe(false);
    sockets[0]!.open();
    expect(client.send({ command: "AcknowledgeRequest", popup_id: 1 })).toBe(true);
    expect(sockets[0]!.sent).toEqual(['{"command":"AcknowledgeRequest","popup_id":1}']);
  });

  it("retries after a drop and resyncs on the new socket", () => {
    client.connect();
    sockets[0]!.open();
    sockets[0]!.close();
    expect(statuses).toEqual([true, false]);
    vi.advanceTimersByTime(1000);
    expect(sockets).toHaveLength(2);
    sockets[1]!.open();
    expect(statuses).toEqual([true, false, true]);
  });

  it("stays quiet once closed deliberately", () => {
    client.connect();
    sockets[0]!.open();
    client.close();
    vi.advanceTimersByTime(10_000);
    expect(sockets).toHaveLength(1);
  });
});
