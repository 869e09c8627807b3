"""Real-socket transport.

Reader threads only move bytes into per-wire queues; all protocol work
happens when the owning loop calls poll(). That keeps broker and client
state machines single-threaded over TCP exactly as they are in-process.
"""
from __future__ import annotations

import logging
import socket
import threading
import time
from collections import deque
from typing import Callable

log = logging.getLogger(__name__)


def wall_ms() -> int:
    return int(time.monotonic() * 1000)


class TcpWire:
    """Byte pipe over a connected socket, drained by poll()."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._rx: deque[bytes] = deque()
        self._rx_lock = threading.Lock()
        self._eof = False
        self.closed = False
        self._receiver: Callable[[bytes], None] | None = None
        self._on_close: Callable[[], None] | None = None
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def set_receiver(self, fn: Callable[[bytes], None]) -> None:
        self._receiver = fn

    def set_on_close(self, fn: Callable[[], None]) -> None:
        self._on_close = fn

    def _read_loop(self) -> None:
        try:
            while True:
                chunk = self._sock.recv(4096)
                if not chunk:
                    break
                with self._rx_lock:
                    self._rx.append(chunk)
        except OSError:
            pass
        self._eof = True

    def poll(self) -> None:
        """Hand buffered bytes to the receiver; detect peer hangup."""
        while True:
            with self._rx_lock:
                chunk = self._rx.popleft() if self._rx else None
            if chunk is None:
                break
            if self._receiver is not None and not self.closed:
                self._receiver(chunk)
        if self._eof and not self.closed:
            self.closed = True
            if self._on_close is not None:
                self._on_close()

    def send(self, data: bytes) -> None:
        if self.closed:
            return
        try:
            self._sock.sendall(data)
        except OSError:
            self._eof = True

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class TcpBrokerServer:
    """Accepts TCP connections and services them against one Broker.

    The accept thread only parks fresh wires; protocol work happens on
    whichever thread drives pump(): the built-in service loop by default,
    or the caller's own loop with external_drive, which keeps a broker
    shared with an in-process stack single-threaded.
    """

    def __init__(self, broker, host: str = "127.0.0.1", port: int = 1883,
                 poll_interval_s: float = 0.01, external_drive: bool = False):
        self.broker = broker
        self.host = host
        self._requested_port = port
        self._poll_interval = poll_interval_s
        self._external = external_drive
        self._wires: list[TcpWire] = []
        self._fresh: list[TcpWire] = []
        self._wires_lock = threading.Lock()
        self._listener: socket.socket | None = None
        self._running = False
        self._threads: list[threading.Thread] = []

    @property
    def port(self) -> int:
        assert self._listener is not None, "server not started"
        return self._listener.getsockname()[1]

    def start(self) -> None:
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((self.host, self._requested_port))
        self._listener.listen(16)
        self._running = True
        accept = threading.Thread(target=self._accept_loop, daemon=True)
        accept.start()
        self._threads = [accept]
        if not self._external:
            service = threading.Thread(target=self._service_loop, daemon=True)
            service.start()
            self._threads.append(service)
        log.info("broker listening on %s:%d", self.host, self.port)

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while self._running:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._wires_lock:
                self._fresh.append(TcpWire(sock))

    def pump(self) -> None:
        """One service pass: adopt fresh wires, drain buffered bytes."""
        with self._wires_lock:
            fresh, self._fresh = self._fresh, []
        for wire in fresh:
            self.broker.accept(wire)
            self._wires.append(wire)
        for wire in list(self._wires):
            wire.poll()
        self._wires = [w for w in self._wires if not w.closed]

    def _service_loop(self) -> None:
        while self._running:
            self.pump()
            self.broker.on_time(wall_ms())
            time.sleep(self._poll_interval)

    def stop(self) -> None:
        self._running = False
        if self._listener is not None:
            self._listener.close()
        with self._wires_lock:
            fresh, self._fresh = self._fresh, []
        for wire in [*self._wires, *fresh]:
            wire.close()
        self._wires = []
        for thread in self._threads:
            thread.join(timeout=2)


def connect_tcp(host: str, port: int, timeout_s: float = 5.0) -> TcpWire:
    sock = socket.create_connection((host, port), timeout=timeout_s)
    sock.settimeout(None)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return TcpWire(sock)
