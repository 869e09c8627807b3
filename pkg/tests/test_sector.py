import math

import pytest
from hypothesis import given, strategies as st

from uamsim.vertidrome.sector import (
    SectorVolume, position_from_track, sector_track,
)

ORIGIN = (0.0, 0.0)


def track_at(east, north, up, center=ORIGIN, elevation=0.0,
             volume=SectorVolume()):
    return sector_track("PAD_A", center, elevation, "UAV1", east, north, up,
                        volume)


def test_southwest_display_row():
    track = track_at(-12.99, -7.50, 91.0)
    assert (track.azimuth_deg, track.distance_m, track.rel_altitude_m) \
        == (240, 15, 91)


def test_due_north_at_pad_height():
    track = track_at(0.0, 100.0, 0.0)
    assert (track.azimuth_deg, track.distance_m, track.rel_altitude_m) \
        == (0, 100, 0)


def test_due_east_is_azimuth_90():
    assert track_at(77.0, 0.0, 10.0).azimuth_deg == 90


def test_far_away_is_outside():
    assert track_at(10_000.0, 0.0, 50.0) is None


def test_cylinder_bounds_are_inclusive():
    assert track_at(150.0, 0.0, 0.0) is not None
    assert track_at(150.1, 0.0, 0.0) is None
    assert track_at(0.0, 10.0, 120.0) is not None
    assert track_at(0.0, 10.0, 120.1) is None
    assert track_at(0.0, 10.0, -0.1) is None


def test_offset_pad_center_and_elevation():
    track = track_at(30.0, 40.0, 52.0, center=(30.0, 30.0), elevation=2.0)
    assert (track.azimuth_deg, track.distance_m, track.rel_altitude_m) \
        == (0, 10, 50)


def test_on_pad_bearing_collapses_to_zero():
    track = track_at(0.2, -0.1, 5.0)
    assert (track.azimuth_deg, track.distance_m) == (0, 0)


def test_inverse_projection_of_display_row():
    east, north, up = position_from_track(ORIGIN, 0.0, 240, 15, 91)
    assert east == pytest.approx(-12.99, abs=0.01)
    assert north == pytest.approx(-7.5, abs=0.01)
    track = track_at(east, north, up)
    assert (track.azimuth_deg, track.distance_m, track.rel_altitude_m) \
        == (240, 15, 91)


@given(azimuth=st.integers(0, 359), distance=st.integers(0, 150),
       rel_alt=st.integers(0, 120))
def test_reprojection_returns_the_same_integers(azimuth, distance, rel_alt):
    east, north, up = position_from_track(ORIGIN, 0.0, azimuth, distance,
                                          rel_alt)
    track = track_at(east, north, up)
    assert track is not None
    expected_azimuth = 0 if distance == 0 else azimuth
    assert (track.azimuth_deg, track.distance_m, track.rel_altitude_m) \
        == (expected_azimuth, distance, rel_alt)


@given(east=st.floats(-160, 160), north=st.floats(-160, 160),
       up=st.floats(0, 130))
def test_projection_is_stable_under_roundtrip(east, north, up):
    first = track_at(east, north, up)
    if first is None:
        assert math.hypot(east, north) > 150.0 or up > 120.0
        return
    rebuilt = position_from_track(ORIGIN, 0.0, first.azimuth_deg,
                                  first.distance_m, first.rel_altitude_m)
    second = track_at(*rebuilt)
    assert second == first
