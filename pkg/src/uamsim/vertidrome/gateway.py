"""Operator gateway: the manager's UI stream over WebSocket.

The console (or a scripted operator) connects, receives one full snapshot,
then live panel events as JSON text frames. Inbound frames are operator
commands; they are queued here and executed by whoever owns the manager's
event loop, so all protocol and schedule state stays single-threaded. Each
command is answered on the issuing connection with a command-result frame.

Event frames: {"event": "snapshot" | "clock" | "sector" | "pads" |
"weather" | "popup" | "popup-cleared" | "close-orders" | "forecast" |
"alert" | "command-result", ...}. Command frames: {"command":
"AcknowledgeRequest" | "ApproveFlight" | "CancelFlight" |
"CreateCloseOrder" | "ClearCloseOrder" | "ReassignSlot" |
"SetAdherenceCriteria" | "SetNotificationThresholds", ...arguments}.
"""
from __future__ import annotations

import json
import queue
import threading
from typing import Callable

from websockets.sync.server import ServerConnection, serve

from .manager import VertidromeManager

DEFAULT_GATEWAY_PORT = 8080


class VsoGateway:
    """WebSocket fan-out for one manager's UI events plus a command queue."""

    def __init__(self, manager: VertidromeManager, host: str = "127.0.0.1",
                 port: int = DEFAULT_GATEWAY_PORT):
        self.manager = manager
        self.host = host
        self._requested_port = port
        self._server = None
        self._thread: threading.Thread | None = None
        self._clients: set[ServerConnection] = set()
        self._lock = threading.Lock()
        self._commands: queue.SimpleQueue[tuple[dict, ServerConnection]] = \
            queue.SimpleQueue()
        manager.add_ui_listener(self.broadcast)

    @property
    def port(self) -> int:
        if self._server is None:
            return self._requested_port
        return self._server.socket.getsockname()[1]

    def start(self) -> None:
        self._server = serve(self._serve_client, self.host,
                             self._requested_port)
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="vso-gateway", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server = None
        if self._thread is not None:
            self._thread.join(timeout=2)
            self._thread = None

    def _serve_client(self, conn: ServerConnection) -> None:
        with self._lock:
            self._clients.add(conn)
        try:
            conn.send(json.dumps(self.manager.snapshot()))
            for frame in conn:
                try:
                    cmd = json.loads(frame)
                except (ValueError, TypeError):
                    self._send(conn, {"event": "command-result", "ok": False,
                                      "reason": "not JSON"})
                    continue
                if isinstance(cmd, dict):
                    self._commands.put((cmd, conn))
                else:
                    self._send(conn, {"event": "command-result", "ok": False,
                                      "reason": "expected an object"})
        except Exception:
            pass
        finally:
            with self._lock:
                self._clients.discard(conn)

    def _send(self, conn: ServerConnection, event: dict) -> None:
        try:
            conn.send(json.dumps(event))
        except Exception:
            with self._lock:
                self._clients.discard(conn)

    def broadcast(self, event: dict) -> None:
        with self._lock:
            clients = list(self._clients)
        payload = json.dumps(event)
        for conn in clients:
            try:
                conn.send(payload)
            except Exception:
                with self._lock:
                    self._clients.discard(conn)

    def drain_commands(self) -> int:
        """Run queued operator commands against the manager. Owner thread only."""
        executed = 0
        while True:
            try:
                cmd, conn = self._commands.get_nowait()
            except queue.Empty:
                return executed
            result = self.manager.apply_vso(cmd)
            self._send(conn, {"event": "command-result",
                              "command": cmd.get("command"),
                              "ok": result["ok"], "reason": result["reason"]})
            executed += 1

    def pending_commands(self) -> bool:
        return not self._commands.empty()


class UiRecorder:
    """Captures the UI event stream as JSON lines, for replay fixtures."""

    def __init__(self, manager: VertidromeManager, clock: Callable[[], int]):
        self.clock = clock
        self.lines: list[str] = []
        self.record(manager.snapshot())
        manager.add_ui_listener(self.record)

    def record(self, event: dict) -> None:
        stamped = {"sim_time_ms": self.clock(), **event}
        self.lines.append(json.dumps(stamped, sort_keys=True))

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.lines) + "\n")
