"""Directional antenna gain from two principal-plane cuts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import InvalidParameterError

Plane = Literal["azimuth", "elevation"]


@dataclass(frozen=True, eq=False)
class PatternCut:
    """Peak-normalized gain samples over one plane, periodic in 360 degrees."""

    angles_deg: np.ndarray
    gains_db: np.ndarray
    plane: Plane

    def __post_init__(self):
        a = np.asarray(self.angles_deg, float)
        g = np.asarray(self.gains_db, float)
        if a.ndim != 1 or a.shape != g.shape or len(a) == 0:
            raise InvalidParameterError("cut needs matching 1-D angle and gain arrays")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(g))):
            raise InvalidParameterError("cut samples must be finite")
        if a[0] < 0 or a[-1] >= 360 or np.any(np.diff(a) <= 0):
            raise InvalidParameterError("cut angles must be strictly increasing in [0, 360)")
        if self.plane not in ("azimuth", "elevation"):
            raise InvalidParameterError(f"unknown plane {self.plane!r}")
        a.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "angles_deg", a)
        object.__setattr__(self, "gains_db", g)

    @property
    def normalized(self) -> bool:
        return bool(np.max(self.gains_db) == 0.0)

    def __call__(self, angle_deg):
        """Linearly interpolated gain, wrapping across 0/360."""
        x = np.mod(np.asarray(angle_deg, float), 360.0)
        return np.interp(x, self.angles_deg, self.gains_db, period=360.0)


@dataclass(frozen=True)
class Orientation:
    boresight_azimuth: float = 0.0  # deg, counter-clockwise from +x
    boresight_tilt: float = 0.0  # deg, positive points below the horizon

    def __post_init__(self):
        if not (math.isfinite(self.boresight_azimuth) and math.isfinite(self.boresight_tilt)):
            raise InvalidParameterError("orientation angles must be finite")
        object.__setattr__(self, "boresight_azimuth", float(self.boresight_azimuth) % 360.0)
        if not -90.0 <= self.boresight_tilt <= 90.0:
            raise InvalidParameterError(f"tilt must be in [-90, 90], got {self.boresight_tilt}")

    def frame(self) -> np.ndarray:
        """Rows are the antenna x (boresight), y and z axes in world coordinates."""
        az = math.radians(self.boresight_azimuth)
        t = math.radians(self.boresight_tilt)
        ca, sa, ct, st = math.cos(az), math.sin(az), math.cos(t), math.sin(t)
        return np.array([[ca * ct, sa * ct, -st],
                         [-sa, ca, 0.0],
                         [ca * st, sa * st, ct]])

    def boresight(self) -> np.ndarray:
        return self.frame()[0]


@dataclass(frozen=True, eq=False)
class Pattern3D:
    """Gain over the sphere, reconstructed additively from two cuts.

    Relative gain at local (azimuth, elevation) is ``cut_az(az) + cut_el(el)``
    in dB, clamped below at ``floor_db``.
    """

    peak_gain_dbi: float
    cut_az: PatternCut
    cut_el: PatternCut
    floor_db: float
    rule: str = "additive-db"

    def relative_db(self, az_deg, el_deg):
        rel = self.cut_az(az_deg) + self.cut_el(el_deg)
        return np.maximum(rel, self.floor_db)

    def key(self) -> tuple:
        """Hashable identity used to cache traced fields."""
        return (self.peak_gain_dbi, self.floor_db, self.rule,
                self.cut_az.angles_deg.tobytes(), self.cut_az.gains_db.tobytes(),
                self.cut_el.angles_deg.tobytes(), self.cut_el.gains_db.tobytes())


def horn_cuts(beamwidth_deg: float, sidelobe_floor_db: float = -20.0,
              step_deg: float = 0.25) -> tuple[PatternCut, PatternCut]:
    """Symmetric Gaussian main lobe with a flat sidelobe floor.

    ``G(a) = -12 (a / beamwidth)^2`` dB, so the gain is -3 dB at half the
    beamwidth, clamped below at ``sidelobe_floor_db``. The same cut is used for
    both planes.
    """
    if not (math.isfinite(beamwidth_deg) and 0 < beamwidth_deg < 180):
        raise InvalidParameterError(f"beamwidth must be in (0, 180), got {beamwidth_deg}")
    if not sidelobe_floor_db < -3:
        raise InvalidParameterError(f"sidelobe floor must be below -3 dB, got {sidelobe_floor_db}")
    angles = np.arange(0.0, 360.0, step_deg)
    signed = np.where(angles > 180.0, angles - 360.0, angles)
    gains = np.maximum(-12.0 * (signed / beamwidth_deg) ** 2, sidelobe_floor_db)
    return PatternCut(angles, gains, "azimuth"), PatternCut(angles.copy(), gains.copy(), "elevation")


def peak_gain_from_beamwidths(bw_az: float, bw_el: float) -> float:
    """Directivity estimate ``10 log10(41253 / (bw_az * bw_el))`` in dBi."""
    if not (0 < bw_az <= 360 and 0 < bw_el <= 360):
        raise InvalidParameterError("beamwidths must be in (0, 360]")
    return 10.0 * math.log10(41253.0 / (bw_az * bw_el))


def synthesize_3d(cut_az: PatternCut, cut_el: PatternCut, peak_gain_dbi: float,
                  floor_db: float | None = None) -> Pattern3D:
    """Build a 3D pattern by summing the two cuts in dB.

    ``floor_db`` defaults to the lowest sample found in either cut.
    """
    for cut in (cut_az, cut_el):
        if not cut.normalized:
            raise InvalidParameterError(f"{cut.plane} cut is not peak-normalized (max must be 0 dB)")
        if float(cut(0.0)) != 0.0:
            raise InvalidParameterError(f"{cut.plane} cut must peak at 0 deg")
    if floor_db is None:
        floor_db = float(min(cut_az.gains_db.min(), cut_el.gains_db.min()))
    if not math.isfinite(peak_gain_dbi):
        raise InvalidParameterError("peak gain must be finite")
    return Pattern3D(float(peak_gain_dbi), cut_az, cut_el, float(floor_db))


def isotropic() -> Pattern3D:
    flat = np.array([0.0])
    zero = np.array([0.0])
    return Pattern3D(0.0, PatternCut(flat, zero, "azimuth"),
                     PatternCut(flat.copy(), zero.copy(), "elevation"), 0.0)


def horn_pattern(beamwidth_deg: float = 30.0, sidelobe_floor_db: float = -20.0,
                 peak_gain_dbi: float | None = None) -> Pattern3D:
    az, el = horn_cuts(beamwidth_deg, sidelobe_floor_db)
    if peak_gain_dbi is None:
        peak_gain_dbi = peak_gain_from_beamwidths(beamwidth_deg, beamwidth_deg)
    return synthesize_3d(az, el, peak_gain_dbi, floor_db=sidelobe_floor_db)


def local_angles(o: Orientation, direction) -> tuple[np.ndarray, np.ndarray]:
    """Azimuth and elevation (deg) of world directions in the antenna frame."""
    d = np.asarray(direction, float)
    local = d @ o.frame().T
    az = np.degrees(np.arctan2(local[..., 1], local[..., 0]))
    el = np.degrees(np.arcsin(np.clip(local[..., 2], -1.0, 1.0)))
    return az, el


def aimed_gain(p: Pattern3D, origins, aim, direction) -> np.ndarray:
    """Gain of antennas at ``origins`` whose boresight points at ``aim``.

    Each row of ``origins`` has its own frame (no roll); ``direction`` holds one
    unit vector per row.
    """
    o = np.asarray(origins, float).reshape(-1, 3)
    d = np.asarray(direction, float).reshape(-1, 3)
    b = np.asarray(aim, float) - o
    horiz = np.hypot(b[:, 0], b[:, 1])
    az = np.arctan2(b[:, 1], b[:, 0])
    tilt = -np.arctan2(b[:, 2], horiz)
    ca, sa, ct, st = np.cos(az), np.sin(az), np.cos(tilt), np.sin(tilt)
    u = d[:, 0] * ca * ct + d[:, 1] * sa * ct - d[:, 2] * st
    v = -d[:, 0] * sa + d[:, 1] * ca
    w = d[:, 0] * ca * st + d[:, 1] * sa * st + d[:, 2] * ct
    loc_az = np.degrees(np.arctan2(v, u))
    loc_el = np.degrees(np.arcsin(np.clip(w, -1.0, 1.0)))
    return p.peak_gain_dbi + p.relative_db(loc_az, loc_el)


def gain(p: Pattern3D, o: Orientation, direction):
    """Absolute gain in dBi toward unit ``direction`` (shape (3,) or (N, 3))."""
    az, el = local_angles(o, direction)
    g = p.peak_gain_dbi + p.relative_db(az, el)
    return float(g) if np.ndim(g) == 0 else g


def load_cut(path: str | Path, plane: Plane) -> PatternCut:
    """Read a two-column ``angle_deg gain_db`` text file.

    Angles are wrapped into [0, 360) and sorted; ``#`` starts a comment and
    commas are accepted as separators.
    """
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].replace(",", " ").strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidParameterError(f"{path}:{lineno}: expected two columns")
        try:
            rows.append((float(parts[0]) % 360.0, float(parts[1])))
        except ValueError as exc:
            raise InvalidParameterError(f"{path}:{lineno}: {exc}") from None
    rows.sort()
    arr = np.array(rows, float).reshape(-1, 2)
    return PatternCut(arr[:, 0], arr[:, 1], plane)
