"""Deterministic in-process transport.

A Network is a logical clock plus an ordered event queue. Every byte handed
to a wire endpoint is delivered to its peer at a scheduled instant; events
due at the same instant run in submission order, so a run is a pure function
of its inputs. Tests inject loss by giving an endpoint a tap that inspects
each frame before it is queued.
"""
from __future__ import annotations

import heapq
from typing import Callable


class Network:
    """Logical clock with an event heap ordered by (due time, sequence)."""

    def __init__(self, start_ms: int = 0):
        self._now = start_ms
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = 0

    @property
    def now_ms(self) -> int:
        return self._now

    def call_at(self, when_ms: int, fn: Callable[[], None]) -> None:
        if when_ms < self._now:
            when_ms = self._now
        heapq.heappush(self._heap, (when_ms, self._seq, fn))
        self._seq += 1

    def call_later(self, delay_ms: int, fn: Callable[[], None]) -> None:
        self.call_at(self._now + delay_ms, fn)

    def advance_to(self, t_ms: int) -> None:
        """Run every event due at or before t_ms, then set the clock to t_ms."""
        while self._heap and self._heap[0][0] <= t_ms:
            when, _, fn = heapq.heappop(self._heap)
            self._now = max(self._now, when)
            fn()
        self._now = max(self._now, t_ms)

    def run_until_idle(self, limit_ms: int | None = None) -> int:
        """Drain the queue completely, advancing time as needed."""
        while self._heap:
            when = self._heap[0][0]
            if limit_ms is not None and when > limit_ms:
                break
            self.advance_to(when)
        return self._now

    @property
    def pending(self) -> int:
        return len(self._heap)


class InprocWire:
    """One endpoint of a bidirectional in-process byte pipe."""

    def __init__(self, network: Network, latency_ms: int = 0):
        self._net = network
        self._latency = latency_ms
        self._peer: InprocWire | None = None
        self._receiver: Callable[[bytes], None] | None = None
        self._on_close: Callable[[], None] | None = None
        self.closed = False
        # Optional frame inspector: return False to drop the frame.
        self.tap: Callable[[bytes], bool] | None = None

    def set_receiver(self, fn: Callable[[bytes], None]) -> None:
        self._receiver = fn

    def set_on_close(self, fn: Callable[[], None]) -> None:
        self._on_close = fn

    def send(self, data: bytes) -> None:
        if self.closed or self._peer is None:
            return
        if self.tap is not None and not self.tap(data):
            return
        peer = self._peer
        self._net.call_later(self._latency, lambda: peer._deliver(data))

    def _deliver(self, data: bytes) -> None:
        if not self.closed and self._receiver is not None:
            self._receiver(data)

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        if self._on_close is not None:
            self._net.call_later(0, self._on_close)
        peer = self._peer
        if peer is not None and not peer.closed:
            self._net.call_later(self._latency, peer.close)


def inproc_pair(network: Network, latency_ms: int = 0) -> tuple[InprocWire, InprocWire]:
    a = InprocWire(network, latency_ms)
    b = InprocWire(network, latency_ms)
    a._peer = b
    b._peer = a
    return a, b
