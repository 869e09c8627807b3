"""Polar sector view around a pad.

Surveillance gives positions in the local east/north/up frame; the operator
display wants them as azimuth (degrees clockwise from north), horizontal
distance and height above the pad, whole numbers only. An aircraft outside
the sector cylinder produces no row at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_SECTOR_RADIUS_M = 150.0
DEFAULT_SECTOR_CEILING_M = 120.0


@dataclass(frozen=True)
class SectorVolume:
    radius_m: float = DEFAULT_SECTOR_RADIUS_M
    ceiling_m: float = DEFAULT_SECTOR_CEILING_M


@dataclass(frozen=True)
class SectorTrack:
    pad: str
    callsign: str
    azimuth_deg: int
    distance_m: int
    rel_altitude_m: int


def sector_track(pad: str, pad_center: tuple[float, float], pad_elevation_m: float,
                 callsign: str, east_m: float, north_m: float, up_m: float,
                 volume: SectorVolume = SectorVolume()) -> SectorTrack | None:
    """Project a position into the pad's sector, or None when outside."""
    d_east = east_m - pad_center[0]
    d_north = north_m - pad_center[1]
    distance = math.hypot(d_east, d_north)
    rel_alt = up_m - pad_elevation_m
    if distance > volume.radius_m or rel_alt > volume.ceiling_m or rel_alt < 0:
        return None
    shown_distance = round(distance)
    if shown_distance == 0:
        azimuth = 0  # bearing is undefined on top of the pad
    else:
        azimuth = round(math.degrees(math.atan2(d_east, d_north)) % 360.0) % 360
    return SectorTrack(pad=pad, callsign=callsign, azimuth_deg=azimuth,
                       distance_m=shown_distance, rel_altitude_m=round(rel_alt))


def position_from_track(pad_center: tuple[float, float], pad_elevation_m: float,
                        azimuth_deg: float, distance_m: float,
                        rel_altitude_m: float) -> tuple[float, float, float]:
    """Inverse of sector_track (before rounding)."""
    theta = math.radians(azimuth_deg)
    return (pad_center[0] + distance_m * math.sin(theta),
            pad_center[1] + distance_m * math.cos(theta),
            pad_elevation_m + rel_altitude_m)
