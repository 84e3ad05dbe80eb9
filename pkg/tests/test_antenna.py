import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uaviab.antenna import (Orientation, PatternCut, aimed_gain, gain, horn_cuts, horn_pattern, isotropic,
                            load_cut, local_angles, peak_gain_from_beamwidths, synthesize_3d)
from uaviab.errors import InvalidParameterError


def test_horn_cut_half_beamwidth_is_minus_3db():
    az, el = horn_cuts(30.0)
    assert az(15.0) == pytest.approx(-3.0)
    assert az(-15.0) == pytest.approx(-3.0)
    assert el(0.0) == 0.0
    assert az(90.0) == -20.0  # floor
    assert az(180.0) == -20.0


def test_peak_gain_from_beamwidths():
    # 10*log10(41253/(bw_az*bw_el)), computed independently
    assert peak_gain_from_beamwidths(30, 30) == pytest.approx(16.61213, abs=1e-5)
    assert peak_gain_from_beamwidths(360, 360) == pytest.approx(-4.97149, abs=1e-5)
    with pytest.raises(InvalidParameterError):
        peak_gain_from_beamwidths(0, 30)


def test_synthesis_is_additive_in_db():
    p = horn_pattern(30.0)
    assert p.peak_gain_dbi == pytest.approx(16.61213, abs=1e-5)
    assert p.relative_db(15.0, 15.0) == pytest.approx(-6.0)
    assert p.relative_db(60.0, 60.0) == -20.0  # sum clamped at the floor


def test_synthesis_requires_normalized_cuts():
    a = np.arange(0.0, 360.0, 1.0)
    shifted = PatternCut(a, np.where(a == 10.0, 0.0, -5.0), "azimuth")
    ok, el = horn_cuts(30.0)
    with pytest.raises(InvalidParameterError):
        synthesize_3d(PatternCut(a, np.full(a.shape, -1.0), "azimuth"), el, 10.0)
    with pytest.raises(InvalidParameterError):
        synthesize_3d(shifted, el, 10.0)
    assert synthesize_3d(ok, el, 10.0).floor_db == -20.0


def test_cut_validation():
    with pytest.raises(InvalidParameterError):
        PatternCut(np.array([0.0, 0.0]), np.array([0.0, -1.0]), "azimuth")
    with pytest.raises(InvalidParameterError):
        PatternCut(np.array([0.0, 360.0]), np.array([0.0, -1.0]), "azimuth")
    with pytest.raises(InvalidParameterError):
        horn_cuts(200.0)


def test_cut_interpolation_wraps():
    cut = PatternCut(np.array([0.0, 90.0, 180.0, 270.0]), np.array([0.0, -10.0, -20.0, -10.0]), "azimuth")
    assert cut(45.0) == pytest.approx(-5.0)
    assert cut(315.0) == pytest.approx(-5.0)
    assert cut(-45.0) == pytest.approx(-5.0)


def test_isotropic_is_flat():
    p = isotropic()
    o = Orientation(37.0, 12.0)
    dirs = np.random.default_rng(0).normal(size=(50, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    assert np.all(gain(p, o, dirs) == 0.0)


def test_orientation_conventions():
    assert np.allclose(Orientation(0, 0).boresight(), [1, 0, 0])
    assert np.allclose(Orientation(90, 0).boresight(), [0, 1, 0])
    assert np.allclose(Orientation(0, 90).boresight(), [0, 0, -1])  # downtilt points down
    assert Orientation(-90, 0).boresight_azimuth == 270.0
    with pytest.raises(InvalidParameterError):
        Orientation(0, 95)


@settings(max_examples=200, deadline=None)
@given(az=st.floats(-720, 720), tilt=st.floats(-90, 90))
def test_frame_is_orthonormal_and_boresight_has_peak_gain(az, tilt):
    o = Orientation(az, tilt)
    f = o.frame()
    assert np.allclose(f @ f.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(f) == pytest.approx(1.0)
    p = horn_pattern(30.0)
    assert gain(p, o, o.boresight()) == pytest.approx(p.peak_gain_dbi)


@settings(max_examples=100, deadline=None)
@given(off=st.floats(0, 80), az=st.floats(0, 360))
def test_gain_falls_off_with_angle_in_the_azimuth_plane(off, az):
    p = horn_pattern(30.0)
    o = Orientation(az, 0.0)
    a = math.radians(az + off)
    g = gain(p, o, np.array([math.cos(a), math.sin(a), 0.0]))
    want = p.peak_gain_dbi + max(-12.0 * (off / 30.0) ** 2, -20.0)
    assert g == pytest.approx(want, abs=0.01)


def test_local_angles_elevation_sign():
    az, el = local_angles(Orientation(0, 0), np.array([0.0, 0.0, 1.0]))
    assert el == pytest.approx(90.0)


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-100, 100), y=st.floats(-100, 100), z=st.floats(50, 150))
def test_aimed_gain_matches_explicit_orientation(x, y, z):
    p = horn_pattern(30.0)
    origin = np.array([x, y, z])
    aim = np.array([3.0, -4.0, 25.0])
    b = aim - origin
    az = math.degrees(math.atan2(b[1], b[0]))
    tilt = -math.degrees(math.atan2(b[2], math.hypot(b[0], b[1])))
    rng = np.random.default_rng(int(abs(x * 1000)) % 2**32)
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    assert aimed_gain(p, origin, aim, d)[0] == pytest.approx(gain(p, Orientation(az, tilt), d), abs=1e-9)
    assert aimed_gain(p, origin, aim, b / np.linalg.norm(b))[0] == pytest.approx(p.peak_gain_dbi)


def test_load_cut(tmp_path):
    f = tmp_path / "cut.txt"
    f.write_text("# az gain\n0 0\n90, -10\n-90 -10  # wraps to 270\n180 -20\n")
    cut = load_cut(f, "azimuth")
    assert list(cut.angles_deg) == [0.0, 90.0, 180.0, 270.0]
    assert cut(45.0) == pytest.approx(-5.0)
    f.write_text("0 0 1\n")
    with pytest.raises(InvalidParameterError, match=":1:"):
        load_cut(f, "azimuth")
