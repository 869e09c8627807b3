"""Typed message schemas, canonical JSON serialization and the topic map.

Every payload on the backbone is an Envelope: a type tag, sender, sequence
number, simulated timestamp and a typed body. Serialization is canonical
(sorted keys, no whitespace) so identical content is identical bytes, which
the determinism guarantees lean on. Each body type maps to exactly one
topic; parse() re-derives the topic and refuses mismatches.
"""
from __future__ import annotations

import dataclasses
import json
import math
import types
import typing
from dataclasses import dataclass, field
from enum import Enum
from typing import Union, get_args, get_origin, get_type_hints


class MessageError(Exception):
    """Malformed or inconsistent message content."""


# -- shared enums -------------------------------------------------------------

class Operation(Enum):
    ARR = "ARR"
    DEP = "DEP"


class Decision(Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


class PadStatus(Enum):
    CLEAR = "CLEAR"
    CLOSED = "CLOSED"


class PadMode(Enum):
    ARR = "ARR"
    DEP = "DEP"
    BOTH = "BOTH"
    NONE = "NONE"


class StatusCause(Enum):
    OPERATOR = "Operator"
    FOREIGN_OBJECT = "ForeignObject"
    WEATHER = "Weather"


class EmergencyKind(Enum):
    PERSON_ON_PAD = "PersonOnPad"
    FOREIGN_OBJECT = "ForeignObject"
    VEHICLE_DISTRESS = "VehicleDistress"


class DeviationKind(Enum):
    SPATIAL = "Spatial"
    TEMPORAL = "Temporal"


class VehicleMode(Enum):
    PARKED = "Parked"
    TAKING_OFF = "TakingOff"
    ENROUTE = "Enroute"
    APPROACH = "Approach"
    LANDING = "Landing"
    LANDED = "Landed"
    HOLDING = "Holding"


class CommandKind(Enum):
    TAKE_OFF = "TakeOff"
    UPLOAD_ROUTE = "UploadRoute"
    LAND = "Land"
    HOLD = "Hold"


# Highest priority value in use; emergency demands always carry it.
EMS_PRIORITY = 100


# -- core value objects --------------------------------------------------------

def _floatify(obj, *names: str) -> None:
    """Coerce numeric fields to float at construction so that direct use and
    a JSON round trip produce identical objects and identical bytes."""
    for name in names:
        value = getattr(obj, name)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise MessageError(f"field {name!r} must be a number")
        object.__setattr__(obj, name, float(value))


@dataclass(frozen=True)
class Waypoint:
    east_m: float
    north_m: float
    up_m: float
    eta_ms: int

    def __post_init__(self):
        _floatify(self, "east_m", "north_m", "up_m")
        for v in (self.east_m, self.north_m, self.up_m):
            if not math.isfinite(v):
                raise MessageError("waypoint coordinates must be finite")


@dataclass(frozen=True)
class FlightPlan:
    callsign: str
    aircraft_type: str
    operation: Operation
    origin: str
    destination: str           # vertidrome id
    requested_pad: str
    priority: int
    slot_start_ms: int
    slot_end_ms: int
    waypoints: tuple[Waypoint, ...]
    request_id: str
    route_name: str = ""

    def __post_init__(self):
        if self.slot_start_ms >= self.slot_end_ms:
            raise MessageError("slot must have positive duration")
        if len(self.waypoints) < 2:
            raise MessageError("a plan needs at least two waypoints")
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            if b.eta_ms <= a.eta_ms:
                raise MessageError("waypoint ETAs must strictly increase")
        if not 0 <= self.priority <= EMS_PRIORITY:
            raise MessageError("priority out of range")

    @property
    def start_ms(self) -> int:
        return self.waypoints[0].eta_ms

    @property
    def end_ms(self) -> int:
        return self.waypoints[-1].eta_ms


@dataclass(frozen=True)
class ForecastRow:
    minute_ms: int
    pad: str = ""
    callsign: str = ""
    route: str = ""
    priority: int = 0
    operation: Operation | None = None
    aircraft: str = ""
    status: str = ""


# -- message bodies -------------------------------------------------------------

@dataclass(frozen=True)
class RegistryRequest:
    operator: str
    serial: str
    callsign: str


@dataclass(frozen=True)
class Registration:
    operator: str
    serial: str
    callsign: str
    uas_id: str


@dataclass(frozen=True)
class FlightPlanFiling:
    plan: FlightPlan


@dataclass(frozen=True)
class LandRequest:
    plan: FlightPlan


@dataclass(frozen=True)
class DepartureRequest:
    plan: FlightPlan


@dataclass(frozen=True)
class FlightAuthorisation:
    callsign: str
    request_id: str
    approved: bool
    reason: str = ""
    pad: str | None = None
    slot_start_ms: int | None = None
    slot_end_ms: int | None = None


@dataclass(frozen=True)
class SlotDecision:
    vertidrome: str
    request_id: str
    decision: Decision
    reason: str = ""
    pad: str | None = None
    slot_start_ms: int | None = None
    slot_end_ms: int | None = None


@dataclass(frozen=True)
class SlotDisplaced:
    vertidrome: str
    callsign: str
    request_id: str
    pad: str
    slot_start_ms: int
    slot_end_ms: int
    reason: str = ""


@dataclass(frozen=True)
class SlotRelease:
    vertidrome: str
    request_id: str
    callsign: str


@dataclass(frozen=True)
class TelemetrySample:
    callsign: str
    east_m: float
    north_m: float
    up_m: float
    ground_speed_ms: float
    timestamp_ms: int
    # which route the sample belongs to, for track plotting
    leg: str = "initial"

    def __post_init__(self):
        _floatify(self, "east_m", "north_m", "up_m", "ground_speed_ms")
        for v in (self.east_m, self.north_m, self.up_m, self.ground_speed_ms):
            if not math.isfinite(v):
                raise MessageError("telemetry values must be finite")


@dataclass(frozen=True)
class PositionReport:
    callsign: str
    east_m: float
    north_m: float
    up_m: float
    ground_speed_ms: float
    timestamp_ms: int

    def __post_init__(self):
        _floatify(self, "east_m", "north_m", "up_m", "ground_speed_ms")
        for v in (self.east_m, self.north_m, self.up_m, self.ground_speed_ms):
            if not math.isfinite(v):
                raise MessageError("position values must be finite")


@dataclass(frozen=True)
class AdherenceNotice:
    callsign: str
    deviation: DeviationKind
    value: float
    limit: float
    timestamp_ms: int
    detail: str = ""

    def __post_init__(self):
        _floatify(self, "value", "limit")


@dataclass(frozen=True)
class EmergencyReport:
    kind: EmergencyKind
    reporter: str
    vertidrome: str | None = None
    pad: str | None = None
    callsign: str | None = None
    detail: str = ""


@dataclass(frozen=True)
class EmsDemand:
    vertidrome: str
    callsign: str
    request_id: str
    window_start_ms: int
    window_end_ms: int
    pad: str | None = None
    priority: int = EMS_PRIORITY


@dataclass(frozen=True)
class EmsConfirmation:
    vertidrome: str
    request_id: str
    pad: str
    slot_start_ms: int
    slot_end_ms: int


@dataclass(frozen=True)
class PadStatusNotice:
    vertidrome: str
    pad: str
    status: PadStatus
    mode: PadMode
    cause: StatusCause | None = None
    detail: str = ""


@dataclass(frozen=True)
class WeatherReport:
    vertidrome: str
    wind_speed_ms: float
    wind_direction_deg: float
    timestamp_ms: int

    def __post_init__(self):
        _floatify(self, "wind_speed_ms", "wind_direction_deg")
        if not math.isfinite(self.wind_speed_ms) or self.wind_speed_ms < 0:
            raise MessageError("wind speed must be finite and non-negative")


@dataclass(frozen=True)
class OperationalForecast:
    vertidrome: str
    generated_at_ms: int
    rows: tuple[ForecastRow, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class GfmuPreference:
    vertidrome: str
    preferred_pads: tuple[str, ...]
    reason: str = ""


@dataclass(frozen=True)
class InfrastructureHealth:
    vertidrome: str
    component: str
    healthy: bool
    detail: str = ""


@dataclass(frozen=True)
class VehicleCommand:
    callsign: str
    command: CommandKind
    plan: FlightPlan | None = None
    detail: str = ""

    def __post_init__(self):
        if self.command == CommandKind.UPLOAD_ROUTE and self.plan is None:
            raise MessageError("route upload needs a plan")


@dataclass(frozen=True)
class VehicleStatus:
    callsign: str
    mode: VehicleMode
    east_m: float
    north_m: float
    up_m: float
    timestamp_ms: int
    event: str = ""
    detail: str = ""

    def __post_init__(self):
        _floatify(self, "east_m", "north_m", "up_m")


Body = Union[
    RegistryRequest, Registration, FlightPlanFiling, LandRequest,
    DepartureRequest, FlightAuthorisation, SlotDecision, SlotDisplaced,
    SlotRelease, TelemetrySample, PositionReport, AdherenceNotice,
    EmergencyReport, EmsDemand, EmsConfirmation, PadStatusNotice,
    WeatherReport, OperationalForecast, GfmuPreference, InfrastructureHealth,
    VehicleCommand, VehicleStatus,
]

_BODY_TYPES: dict[str, type] = {cls.__name__: cls for cls in get_args(Body)}


# -- topic map -------------------------------------------------------------------

def topic_for(body: Body) -> str:
    """The single topic a body type travels on."""
    if isinstance(body, RegistryRequest):
        return "uspace/registry/request"
    if isinstance(body, Registration):
        return "uspace/registry/response"
    if isinstance(body, FlightPlanFiling):
        return "uspace/flightplan/request"
    if isinstance(body, (LandRequest, DepartureRequest)):
        return f"vertidrome/{body.plan.destination}/request"
    if isinstance(body, FlightAuthorisation):
        return f"uspace/flightplan/decision/{body.callsign}"
    if isinstance(body, (SlotDecision, SlotDisplaced, EmsConfirmation)):
        return f"vertidrome/{body.vertidrome}/decision"
    if isinstance(body, (EmsDemand, SlotRelease)):
        return f"vertidrome/{body.vertidrome}/request"
    if isinstance(body, TelemetrySample):
        return f"uspace/telemetry/{body.callsign}"
    if isinstance(body, PositionReport):
        return f"uspace/position/{body.callsign}"
    if isinstance(body, AdherenceNotice):
        return f"uspace/adherence/{body.callsign}"
    if isinstance(body, EmergencyReport):
        return "uspace/emergency"
    if isinstance(body, PadStatusNotice):
        return f"vertidrome/{body.vertidrome}/padstatus"
    if isinstance(body, WeatherReport):
        return f"vertidrome/{body.vertidrome}/weather"
    if isinstance(body, OperationalForecast):
        return f"vertidrome/{body.vertidrome}/forecast"
    if isinstance(body, GfmuPreference):
        return f"vertidrome/{body.vertidrome}/gfmu"
    if isinstance(body, InfrastructureHealth):
        return f"vertidrome/{body.vertidrome}/infrastructure"
    if isinstance(body, VehicleCommand):
        return f"fleet/{body.callsign}/command"
    if isinstance(body, VehicleStatus):
        return f"fleet/{body.callsign}/status"
    raise MessageError(f"no topic for {type(body).__name__}")


def delivery_for(body: Body) -> tuple[int, bool]:
    """(qos, retain) policy per body type.

    Positions are volume traffic and tolerate loss; commands and decisions
    must arrive; pad status, weather and forecast are retained so late
    joiners see current state; emergencies use the exactly-once grade.
    """
    if isinstance(body, (TelemetrySample, PositionReport)):
        return 0, False
    if isinstance(body, EmergencyReport):
        return 2, False
    if isinstance(body, (PadStatusNotice, WeatherReport, OperationalForecast)):
        return 1, True
    return 1, False


# -- envelopes --------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    type: str
    sender: str
    seq: int
    sim_time_ms: int
    topic: str
    body: Body


def make_envelope(sender: str, seq: int, sim_time_ms: int, body: Body) -> Envelope:
    return Envelope(type=type(body).__name__, sender=sender, seq=seq,
                    sim_time_ms=sim_time_ms, topic=topic_for(body), body=body)


def serialize(envelope: Envelope) -> bytes:
    doc = {
        "type": envelope.type,
        "sender": envelope.sender,
        "seq": envelope.seq,
        "sim_time_ms": envelope.sim_time_ms,
        "topic": envelope.topic,
        "body": _to_jsonable(envelope.body),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def parse(raw: bytes) -> Envelope:
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MessageError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MessageError("envelope must be a JSON object")
    for key, kind in (("type", str), ("sender", str), ("seq", int),
                      ("sim_time_ms", int), ("topic", str), ("body", dict)):
        if key not in doc:
            raise MessageError(f"envelope missing {key!r}")
        if not isinstance(doc[key], kind) or isinstance(doc[key], bool):
            raise MessageError(f"envelope field {key!r} has wrong type")
    cls = _BODY_TYPES.get(doc["type"])
    if cls is None:
        raise MessageError(f"unknown message type {doc['type']!r}")
    body = _from_jsonable(cls, doc["body"])
    expected_topic = topic_for(body)
    if doc["topic"] != expected_topic:
        raise MessageError(
            f"{doc['type']} belongs on {expected_topic!r}, not {doc['topic']!r}")
    return Envelope(type=doc["type"], sender=doc["sender"], seq=doc["seq"],
                    sim_time_ms=doc["sim_time_ms"], topic=doc["topic"], body=body)


class Outbox:
    """Stamps envelopes for one service: unique seq, monotonic time."""

    def __init__(self, sender: str, clock):
        self.sender = sender
        self.clock = clock
        self._seq = 0
        self._last_ms = -1

    def make(self, body: Body) -> Envelope:
        now = self.clock()
        if now < self._last_ms:
            raise MessageError(f"{self.sender}: clock went backwards")
        self._last_ms = now
        self._seq += 1
        return make_envelope(self.sender, self._seq, now, body)


# -- dataclass <-> JSON plumbing ----------------------------------------------------

def _to_jsonable(value):
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _to_jsonable(getattr(value, f.name))
                for f in dataclasses.fields(value)}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        raise MessageError("non-finite float is not serializable")
    return value


_HINTS_CACHE: dict[type, dict[str, object]] = {}


def _hints(cls: type) -> dict[str, object]:
    if cls not in _HINTS_CACHE:
        _HINTS_CACHE[cls] = get_type_hints(cls)
    return _HINTS_CACHE[cls]


def _from_jsonable(cls: type, data) -> object:
    if not isinstance(data, dict):
        raise MessageError(f"{cls.__name__} body must be an object")
    hints = _hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            kwargs[f.name] = _decode_value(hints[f.name], data[f.name], f.name)
        elif (f.default is dataclasses.MISSING
              and f.default_factory is dataclasses.MISSING):
            raise MessageError(f"{cls.__name__} missing field {f.name!r}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise MessageError(f"invalid {cls.__name__}: {exc}") from exc


def _decode_value(hint, value, name: str):
    origin = get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = get_args(hint)
        if value is None:
            if type(None) in args:
                return None
            raise MessageError(f"field {name!r} must not be null")
        inner = [a for a in args if a is not type(None)]
        return _decode_value(inner[0], value, name)
    if origin is tuple:
        if not isinstance(value, list):
            raise MessageError(f"field {name!r} must be an array")
        item_hint = get_args(hint)[0]
        return tuple(_decode_value(item_hint, v, name) for v in value)
    if isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint(value)
        except ValueError as exc:
            raise MessageError(f"field {name!r}: {exc}") from exc
    if dataclasses.is_dataclass(hint):
        return _from_jsonable(hint, value)
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise MessageError(f"field {name!r} must be a number")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise MessageError(f"field {name!r} must be an integer")
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise MessageError(f"field {name!r} must be a boolean")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise MessageError(f"field {name!r} must be a string")
        return value
    raise MessageError(f"field {name!r} has unsupported type {hint!r}")
