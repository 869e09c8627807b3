"""Scenario configuration: YAML in, validated dataclasses out.

Times in scenario files are human-friendly seconds (at_s, depart_s,
timeout_s); everything is converted to milliseconds here so the rest of the
stack never sees a float second again. Every cross-reference (profiles,
vertidromes, pads, callsigns) is resolved at load time: a config that loads
is a config that starts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from ..messages import EmergencyKind
from ..vehicles import PROFILES

SHIPPED = ("nominal", "rerouting")


class ConfigError(Exception):
    pass


@dataclass
class SectorConfig:
    radius_m: float = 150.0
    ceiling_m: float = 120.0


@dataclass
class PadConfig:
    pad_id: str
    center: tuple[float, float]
    elevation_m: float = 0.0
    approach_deg: tuple[float, float] = (0.0, 360.0)
    approach_radius_m: float = 0.0


@dataclass
class VertidromeConfig:
    vertidrome_id: str
    pads: list[PadConfig]


@dataclass
class GeofenceConfig:
    name: str
    corners: list[tuple[float, float]]


@dataclass
class WeatherEntry:
    at_ms: int
    vertidrome: str
    direction_deg: float
    speed_ms: float


@dataclass
class DetectionEntry:
    at_ms: int
    kind: EmergencyKind
    vertidrome: str
    pad: str | None = None
    detail: str = ""


@dataclass
class VehicleConfig:
    callsign: str
    profile: str
    start: tuple[float, float, float]
    watches: str | None = None          # vertidrome whose weather it reads
    detections: list[DetectionEntry] = field(default_factory=list)


@dataclass
class FlightConfig:
    callsign: str
    destination: str
    pad: str | None = None
    alternates: list[str] = field(default_factory=list)
    origin_name: str = ""
    depart_ms: int = 0
    priority: int = 1


@dataclass
class ScenarioConfig:
    name: str
    seed: int = 0
    tick_ms: int = 500
    timeout_s: float = 600.0
    person_in_loop: bool = False
    expect: str | None = None           # template name, resolved by the runner
    operator: str = "OP-1"
    cruise_ms: float = 2.0
    cruise_alt_m: float = 30.0
    console_vertidrome: str | None = None
    sector: SectorConfig = field(default_factory=SectorConfig)
    geofences: list[GeofenceConfig] = field(default_factory=list)
    vertidromes: list[VertidromeConfig] = field(default_factory=list)
    weather: list[WeatherEntry] = field(default_factory=list)
    vehicles: list[VehicleConfig] = field(default_factory=list)
    flights: list[FlightConfig] = field(default_factory=list)

    def vertidrome_ids(self) -> list[str]:
        return [v.vertidrome_id for v in self.vertidromes]

    def pads_of(self, vertidrome_id: str) -> list[PadConfig]:
        for v in self.vertidromes:
            if v.vertidrome_id == vertidrome_id:
                return v.pads
        return []


def _ms(seconds) -> int:
    return round(float(seconds) * 1000.0)


def _pair(value, where: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{where}: expected a pair of numbers")
    return (float(value[0]), float(value[1]))


def _triple(value, where: str) -> tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{where}: expected [east, north, up]")
    return (float(value[0]), float(value[1]), float(value[2]))


def _require(mapping: dict, key: str, where: str):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where}: expected a mapping")
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _load_pad(raw: dict, where: str) -> PadConfig:
    pad = PadConfig(
        pad_id=str(_require(raw, "id", where)),
        center=_pair(_require(raw, "center", where), f"{where}.center"),
        elevation_m=float(raw.get("elevation_m", 0.0)))
    if "approach_deg" in raw:
        pad.approach_deg = _pair(raw["approach_deg"], f"{where}.approach_deg")
        pad.approach_radius_m = float(_require(raw, "approach_radius_m", where))
    return pad


def _load_detection(raw: dict, where: str) -> DetectionEntry:
    kind_name = str(_require(raw, "kind", where))
    try:
        kind = EmergencyKind(kind_name)
    except ValueError:
        known = ", ".join(k.value for k in EmergencyKind)
        raise ConfigError(f"{where}: unknown kind {kind_name!r} "
                          f"(one of {known})") from None
    return DetectionEntry(
        at_ms=_ms(_require(raw, "at_s", where)),
        kind=kind,
        vertidrome=str(_require(raw, "vertidrome", where)),
        pad=raw.get("pad"),
        detail=str(raw.get("detail", "")))


def parse_scenario(doc: dict, name_hint: str = "scenario") -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("scenario file must hold a mapping at the top level")
    cfg = ScenarioConfig(name=str(doc.get("name", name_hint)))
    cfg.seed = int(doc.get("seed", 0))
    cfg.tick_ms = int(doc.get("tick_ms", 500))
    cfg.timeout_s = float(doc.get("timeout_s", 600.0))
    cfg.person_in_loop = bool(doc.get("person_in_loop", False))
    cfg.expect = doc.get("expect")
    cfg.operator = str(doc.get("operator", "OP-1"))
    cfg.cruise_ms = float(doc.get("cruise_ms", 2.0))
    cfg.cruise_alt_m = float(doc.get("cruise_alt_m", 30.0))
    cfg.console_vertidrome = doc.get("console_vertidrome")

    world = doc.get("world", {})
    if "sector" in world:
        sector = world["sector"]
        cfg.sector = SectorConfig(
            radius_m=float(sector.get("radius_m", 150.0)),
            ceiling_m=float(sector.get("ceiling_m", 120.0)))
    for i, raw in enumerate(world.get("geofences", [])):
        where = f"world.geofences[{i}]"
        corners = [_pair(c, f"{where}.corners") for c in
                   _require(raw, "corners", where)]
        cfg.geofences.append(GeofenceConfig(
            name=str(raw.get("name", f"geofence-{i}")), corners=corners))
    for i, raw in enumerate(world.get("vertidromes", [])):
        where = f"world.vertidromes[{i}]"
        pads_raw = _require(raw, "pads", where)
        if not pads_raw:
            raise ConfigError(f"{where}: a vertidrome needs at least one pad")
        cfg.vertidromes.append(VertidromeConfig(
            vertidrome_id=str(_require(raw, "id", where)),
            pads=[_load_pad(p, f"{where}.pads[{j}]")
                  for j, p in enumerate(pads_raw)]))

    for i, raw in enumerate(doc.get("weather", [])):
        where = f"weather[{i}]"
        cfg.weather.append(WeatherEntry(
            at_ms=_ms(raw.get("at_s", 0)),
            vertidrome=str(_require(raw, "vertidrome", where)),
            direction_deg=float(_require(raw, "direction_deg", where)),
            speed_ms=float(_require(raw, "speed_ms", where))))

    for i, raw in enumerate(doc.get("vehicles", [])):
        where = f"vehicles[{i}]"
        cfg.vehicles.append(VehicleConfig(
            callsign=str(_require(raw, "callsign", where)),
            profile=str(_require(raw, "profile", where)),
            start=_triple(_require(raw, "start", where), f"{where}.start"),
            watches=raw.get("watches"),
            detections=[_load_detection(d, f"{where}.detections[{j}]")
                        for j, d in enumerate(raw.get("detections", []))]))

    for i, raw in enumerate(doc.get("flights", [])):
        where = f"flights[{i}]"
        cfg.flights.append(FlightConfig(
            callsign=str(_require(raw, "callsign", where)),
            destination=str(_require(raw, "destination", where)),
            pad=raw.get("pad"),
            alternates=[str(a) for a in raw.get("alternates", [])],
            origin_name=str(raw.get("origin_name", "")),
            depart_ms=_ms(raw.get("depart_s", 0)),
            priority=int(raw.get("priority", 1))))

    _validate(cfg)
    return cfg


def _validate(cfg: ScenarioConfig) -> None:
    if cfg.tick_ms <= 0:
        raise ConfigError("tick_ms must be positive")
    if cfg.timeout_s <= 0:
        raise ConfigError("timeout_s must be positive")
    vd_ids = cfg.vertidrome_ids()
    if len(set(vd_ids)) != len(vd_ids):
        raise ConfigError("duplicate vertidrome ids")
    for v in cfg.vertidromes:
        pad_ids = [p.pad_id for p in v.pads]
        if len(set(pad_ids)) != len(pad_ids):
            raise ConfigError(f"duplicate pad ids at {v.vertidrome_id}")
    callsigns = [v.callsign for v in cfg.vehicles]
    if len(set(callsigns)) != len(callsigns):
        raise ConfigError("duplicate vehicle callsigns")

    def check_pad(vertidrome: str, pad: str | None, where: str) -> None:
        if vertidrome not in vd_ids:
            raise ConfigError(f"{where}: unknown vertidrome {vertidrome!r}")
        if pad is not None:
            pads = [p.pad_id for p in cfg.pads_of(vertidrome)]
            if pad not in pads:
                raise ConfigError(f"{where}: unknown pad {vertidrome}/{pad}")

    for v in cfg.vehicles:
        if v.profile not in PROFILES:
            raise ConfigError(f"vehicle {v.callsign}: unknown profile "
                              f"{v.profile!r} (one of {sorted(PROFILES)})")
        if v.watches is not None and v.watches not in vd_ids:
            raise ConfigError(f"vehicle {v.callsign}: watches unknown "
                              f"vertidrome {v.watches!r}")
        for d in v.detections:
            check_pad(d.vertidrome, d.pad, f"vehicle {v.callsign} detection")
    for f in cfg.flights:
        if f.callsign not in callsigns:
            raise ConfigError(f"flight {f.callsign}: no such vehicle")
        check_pad(f.destination, f.pad, f"flight {f.callsign}")
        for alt in f.alternates:
            if alt not in vd_ids:
                raise ConfigError(f"flight {f.callsign}: unknown alternate "
                                  f"{alt!r}")
    for w in cfg.weather:
        if w.vertidrome not in vd_ids:
            raise ConfigError(f"weather entry: unknown vertidrome "
                              f"{w.vertidrome!r}")
        if w.speed_ms < 0:
            raise ConfigError("weather entry: negative wind speed")
    if cfg.console_vertidrome is not None \
            and cfg.console_vertidrome not in vd_ids:
        raise ConfigError(f"console_vertidrome {cfg.console_vertidrome!r} "
                          "is not a configured vertidrome")


def load_scenario(source: str | Path) -> ScenarioConfig:
    """Load a shipped scenario by name, or any YAML file by path."""
    name = str(source)
    if name in SHIPPED:
        text = (resources.files("uamsim.scenario") / "data"
                / f"{name}.yaml").read_text(encoding="utf-8")
        return parse_scenario(yaml.safe_load(text), name)
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"no shipped scenario or file named {name!r}")
    doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    return parse_scenario(doc, path.stem)
