"""Pad reservations.

A slot is a claim on one pad for a time window. Reserved and InProgress
slots block the pad; Completed and Displaced ones are history, kept only
for the forecast display. The schedule refuses any reservation that would
overlap a blocking slot, which keeps the no-double-booking invariant in
one place instead of scattered across the manager's decision paths.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from ..messages import Operation


class SlotState(Enum):
    RESERVED = "Reserved"
    IN_PROGRESS = "InProgress"
    COMPLETED = "Completed"
    DISPLACED = "Displaced"


BLOCKING = (SlotState.RESERVED, SlotState.IN_PROGRESS)


@dataclass
class Slot:
    callsign: str
    pad: str
    start_ms: int
    end_ms: int
    operation: Operation
    priority: int = 0
    state: SlotState = SlotState.RESERVED
    request_id: str = ""
    aircraft_type: str = ""
    route: str = ""

    @property
    def blocking(self) -> bool:
        return self.state in BLOCKING


def overlaps(a_start: int, a_end: int, b_start: int, b_end: int) -> bool:
    """Open-interval overlap: windows touching end to start coexist."""
    return a_start < b_end and b_start < a_end


class ScheduleError(Exception):
    pass


class PadSchedule:
    def __init__(self, pad_ids: Iterable[str]):
        self.pad_ids = list(pad_ids)
        self.slots: list[Slot] = []

    def blocking_on(self, pad: str) -> list[Slot]:
        return [s for s in self.slots if s.pad == pad and s.blocking]

    def fits(self, pad: str, start_ms: int, end_ms: int) -> bool:
        if pad not in self.pad_ids or end_ms <= start_ms:
            return False
        return not any(overlaps(start_ms, end_ms, s.start_ms, s.end_ms)
                       for s in self.blocking_on(pad))

    def reserve(self, slot: Slot) -> Slot:
        if not self.fits(slot.pad, slot.start_ms, slot.end_ms):
            raise ScheduleError(
                f"window [{slot.start_ms}, {slot.end_ms}) not free on {slot.pad}")
        slot.state = SlotState.RESERVED
        self.slots.append(slot)
        return slot

    def displace_overlapping(self, pad: str, start_ms: int, end_ms: int,
                             below_priority: int) -> list[Slot]:
        """Push Reserved slots under the given priority out of the window.

        InProgress slots stay put; a flight already on final cannot be
        bumped, the caller has to pick a later window instead.
        """
        displaced = []
        for slot in self.blocking_on(pad):
            if (slot.state == SlotState.RESERVED
                    and slot.priority < below_priority
                    and overlaps(start_ms, end_ms, slot.start_ms, slot.end_ms)):
                slot.state = SlotState.DISPLACED
                displaced.append(slot)
        return displaced

    def displace_all_reserved(self, pad: str) -> list[Slot]:
        displaced = [s for s in self.blocking_on(pad)
                     if s.state == SlotState.RESERVED]
        for slot in displaced:
            slot.state = SlotState.DISPLACED
        return displaced

    def next_free_window(self, pad: str, earliest_ms: int,
                         duration_ms: int) -> tuple[int, int]:
        """Earliest window of the given length starting at or after earliest_ms."""
        start = earliest_ms
        busy = sorted(self.blocking_on(pad), key=lambda s: s.start_ms)
        for slot in busy:
            if overlaps(start, start + duration_ms, slot.start_ms, slot.end_ms):
                start = slot.end_ms
        return start, start + duration_ms

    def slot_for_request(self, request_id: str) -> Slot | None:
        for slot in self.slots:
            if slot.request_id == request_id and slot.blocking:
                return slot
        return None

    def blocking_slot_for(self, callsign: str) -> Slot | None:
        for slot in self.slots:
            if slot.callsign == callsign and slot.blocking:
                return slot
        return None

    def release(self, request_id: str) -> Slot | None:
        """Drop a blocking reservation entirely (fleet gave the slot back)."""
        slot = self.slot_for_request(request_id)
        if slot is not None:
            self.slots.remove(slot)
        return slot

    def check_no_overlap(self) -> None:
        """Raise if two blocking slots share a pad window. Test hook."""
        for pad in self.pad_ids:
            busy = sorted(self.blocking_on(pad), key=lambda s: s.start_ms)
            for a, b in zip(busy, busy[1:]):
                if overlaps(a.start_ms, a.end_ms, b.start_ms, b.end_ms):
                    raise ScheduleError(f"{a.callsign} and {b.callsign} overlap on {pad}")
