"""UAV relaying: adaptive-power amplify-and-forward and gated decode-and-forward."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Optional, Sequence

import numpy as np

from .antenna import Pattern3D
from .errors import EmptyTableError, InvalidParameterError, InvalidPositionError
from .radio import CoverageMap, FieldCache, RadioConfig, Transmitter, noise_power, watts_to_dbm
from .raytrace import Band
from .scene import Scene

Mode = Literal["ob-af", "ib-df"]
MODES = ("ob-af", "ib-df")


@dataclass(frozen=True)
class AfConfig:
    """Amplify-and-forward power mapping.

    ``gamma_u_max_db`` normalizes the backhaul SINR; it has no default on
    purpose because it is a property of the deployment.
    """

    p_max_w: float
    gamma_u_max_db: float
    domain_rule: str = "db-ratio"

    def __post_init__(self):
        if not (math.isfinite(self.p_max_w) and self.p_max_w > 0):
            raise InvalidParameterError("p_max_w must be > 0")
        if not (math.isfinite(self.gamma_u_max_db) and self.gamma_u_max_db > 0):
            raise InvalidParameterError("gamma_u_max_db must be > 0")
        if self.domain_rule != "db-ratio":
            raise InvalidParameterError(f"unsupported domain rule {self.domain_rule!r}")


@dataclass(frozen=True)
class DfConfig:
    threshold_db: float = 15.0

    def __post_init__(self):
        if not math.isfinite(self.threshold_db):
            raise InvalidParameterError("DF threshold must be finite")


@dataclass(frozen=True)
class BackhaulReport:
    uav_id: str
    gamma_bh_db: Optional[float]
    position: tuple[float, float, float]


def _is_gap(gamma) -> bool:
    return gamma is None or (isinstance(gamma, float) and math.isnan(gamma))


def af_tx_power(gamma_bh_db: Optional[float], cfg: AfConfig) -> float:
    """UAV access power in watts: ``p_max * gamma_bh_db / gamma_u_max_db``.

    The ratio is taken between SINRs expressed in dB and the result is clamped
    to ``[0, p_max]``; a gap or non-positive SINR leaves the UAV idle.
    """
    if _is_gap(gamma_bh_db) or gamma_bh_db <= 0:
        return 0.0
    return min(cfg.p_max_w, cfg.p_max_w * gamma_bh_db / cfg.gamma_u_max_db)


def build_power_table(backhaul_map: CoverageMap, cfg: AfConfig,
                      band: Optional[str] = None) -> list[tuple[float, float]]:
    """Distinct backhaul SINRs of the map and their AF power in dBm, ascending.

    Cells whose SINR would leave the UAV idle (gap or <= 0 dB) are omitted.
    """
    if band is None:
        if len(backhaul_map.sinr_db) != 1:
            raise InvalidParameterError("map has several bands; pass one explicitly")
        band = next(iter(backhaul_map.sinr_db))
    values = backhaul_map.best_sinr(band)[backhaul_map.outdoor]
    values = np.unique(values[np.isfinite(values) & (values > 0)])
    if len(values) == 0:
        raise EmptyTableError("backhaul map has no usable SINR cells")
    return [(float(g), watts_to_dbm(af_tx_power(float(g), cfg))) for g in values]


def df_active(gamma_bh_db: Optional[float], cfg: DfConfig) -> bool:
    """True iff the backhaul SINR is known and at least the threshold."""
    return not _is_gap(gamma_bh_db) and gamma_bh_db >= cfg.threshold_db


def _gamma(donor_mw: float, interf_mw: float, noise_mw: float) -> Optional[float]:
    if donor_mw <= 0:
        return None
    return float(10.0 * np.log10(donor_mw / (noise_mw + interf_mw)))


def apply_relaying(donor: Transmitter, uavs: Sequence[Transmitter], mode: Mode, scene: Scene,
                   af: Optional[AfConfig] = None, df: Optional[DfConfig] = None,
                   access_band: Optional[Band] = None, radio: RadioConfig = RadioConfig(),
                   backhaul_cache: Optional[FieldCache] = None,
                   backhaul_pattern: Optional[Pattern3D] = None,
                   ) -> tuple[list[Transmitter], list[BackhaulReport]]:
    """Set each UAV's access band, power and activity from its backhaul SINR.

    ob-af: UAVs transmit on ``access_band`` at the AF-mapped power and only
    the donor band's transmitters shape the backhaul SINR.

    ib-df: UAVs reuse the donor band at full power. Active UAVs interfere with
    each other's backhaul, so the active set is found by starting with every
    UAV on and repeatedly switching off those below the threshold until
    nothing changes.

    Each UAV receives the backhaul with ``backhaul_pattern`` aimed at the
    donor (isotropic when None). ``backhaul_cache`` may hold unit fields over a
    point set containing every UAV position, built with the same receive
    antenna; otherwise one is built here.
    """
    if mode not in MODES:
        raise InvalidParameterError(f"unknown relaying mode {mode!r}")
    want = "af" if mode == "ob-af" else "df"
    for u in uavs:
        if u.relay_mode != want:
            raise InvalidParameterError(f"UAV {u.id} has relay mode {u.relay_mode!r}, expected {want!r}")
    if not uavs:
        return [], []
    pos = np.array([u.position for u in uavs], float)
    inside = scene.inside_building(pos)
    if inside.any():
        bad = uavs[int(np.flatnonzero(inside)[0])]
        raise InvalidPositionError(f"UAV {bad.id} at {bad.position} is inside a building")
    if backhaul_cache is None:
        backhaul_cache = FieldCache(scene, pos, radio, backhaul_pattern, donor.position)
    where = _locate(backhaul_cache.points, pos)
    noise_mw = 10.0 ** (noise_power(donor.band, radio.noise_figure_db) / 10.0)
    donor_mw = backhaul_cache.fields([donor])[0][where] * 10.0 ** (donor.tx_power_dbm / 10.0)

    if mode == "ob-af":
        if af is None or access_band is None:
            raise InvalidParameterError("ob-af needs an AfConfig and an access band")
        if access_band == donor.band:
            raise InvalidParameterError("ob-af access band must differ from the donor band")
        out, reports = [], []
        for i, u in enumerate(uavs):
            g = _gamma(donor_mw[i], 0.0, noise_mw)
            p_w = af_tx_power(g, af)
            out.append(replace(u, band=access_band, max_power_w=af.p_max_w,
                               tx_power_dbm=watts_to_dbm(p_w), active=p_w > 0))
            reports.append(BackhaulReport(u.id, g, u.position))
        return out, reports

    if df is None:
        raise InvalidParameterError("ib-df needs a DfConfig")
    full = [replace(u, band=donor.band, tx_power_dbm=watts_to_dbm(u.max_power_w), active=True)
            for u in uavs]
    uav_fields = backhaul_cache.fields(full)
    uav_mw = np.stack([f[where] * 10.0 ** (u.tx_power_dbm / 10.0) for u, f in zip(full, uav_fields)])
    active = np.ones(len(uavs), bool)
    while True:
        gammas = []
        for i in range(len(uavs)):
            others = active.copy()
            others[i] = False
            gammas.append(_gamma(donor_mw[i], float(uav_mw[others, i].sum()), noise_mw))
        keep = np.array([active[i] and df_active(gammas[i], df) for i in range(len(uavs))])
        if np.array_equal(keep, active):
            break
        active = keep
    out = [replace(u, active=bool(a)) for u, a in zip(full, active)]
    reports = [BackhaulReport(u.id, g, u.position) for u, g in zip(uavs, gammas)]
    return out, reports


def _locate(points: np.ndarray, targets: np.ndarray) -> np.ndarray:
    idx = []
    for t in targets:
        hit = np.flatnonzero(np.all(points == t, axis=1))
        if len(hit) == 0:
            raise InvalidParameterError(f"position {tuple(t)} is not in the backhaul field cache")
        idx.append(int(hit[0]))
    return np.array(idx)
