"""A scripted stand-in for the human operator.

Connects to the gateway like the console would, acknowledges every pop-up,
and approves every pending flight request. Person-in-loop runs can use it
when no human is around, and the gateway tests use it to exercise the
command path end to end.
"""
from __future__ import annotations

import json
import threading

from websockets.sync.client import ClientConnection, connect


class VsoStub:
    def __init__(self, uri: str, reject_callsigns: set[str] | None = None):
        self.uri = uri
        self.reject_callsigns = reject_callsigns or set()
        self.events: list[dict] = []
        self._ws: ClientConnection | None = None
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._ws = connect(self.uri)
        self._thread = threading.Thread(target=self._pump, name="vso-stub",
                                        daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._ws is not None:
            self._ws.close()
        if self._thread is not None:
            self._thread.join(timeout=2)
            self._thread = None

    def _pump(self) -> None:
        try:
            for frame in self._ws:
                event = json.loads(frame)
                self.events.append(event)
                self._react(event)
        except Exception:
            pass

    def _react(self, event: dict) -> None:
        popups = []
        if event.get("event") == "popup":
            popups = [event["popup"]]
        elif event.get("event") == "snapshot":
            popups = event.get("popups", [])
        for popup in popups:
            if popup.get("kind") == "flight-request" and popup.get("request_id"):
                verb = ("CancelFlight"
                        if popup.get("callsign") in self.reject_callsigns
                        else "ApproveFlight")
                self._send({"command": verb,
                            "request_id": popup["request_id"]})
            self._send({"command": "AcknowledgeRequest",
                        "popup_id": popup["popup_id"]})

    def _send(self, cmd: dict) -> None:
        if self._ws is not None:
            self._ws.send(json.dumps(cmd))
