from .sector import SectorTrack, SectorVolume, position_from_track, sector_track
from .schedule import PadSchedule, Slot, SlotState, overlaps
from .manager import (
    Pad, VertidromeManager, WeatherLimits, WeatherState, evaluate_weather,
)

__all__ = [
    "SectorTrack", "SectorVolume", "position_from_track", "sector_track",
    "PadSchedule", "Slot", "SlotState", "overlaps",
    "Pad", "VertidromeManager", "WeatherLimits", "WeatherState",
    "evaluate_weather",
]
