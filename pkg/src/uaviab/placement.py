"""Greedy 3D placement of relay UAVs over a candidate grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .antenna import Orientation, Pattern3D
from .errors import InfeasibleError, InvalidParameterError, InvalidPositionError
from .radio import (CoverageMap, FieldCache, RadioConfig, Transmitter, _assemble,
                    coverage_fraction, grid_axis, noise_power, watts_to_dbm)
from .raytrace import Band
from .relay import MODES, AfConfig, BackhaulReport, DfConfig, Mode, apply_relaying
from .scene import Scene


@dataclass(frozen=True)
class UavTemplate:
    """What every placed UAV looks like apart from its position."""

    pattern: Pattern3D
    orientation: Orientation = Orientation(0.0, 90.0)
    max_power_w: float = 5.0


@dataclass(frozen=True)
class PlacementConfig:
    uav: UavTemplate
    access_band: Optional[Band] = None  # f2, ob-af only
    af: Optional[AfConfig] = None
    df: Optional[DfConfig] = None
    radio: RadioConfig = RadioConfig()
    backhaul_pattern: Optional[Pattern3D] = None  # UAV backhaul antenna, aimed at the donor
    user_altitude: float = 1.5
    user_resolution: float = 10.0


@dataclass(eq=False)
class CandidateGrid:
    altitudes: tuple[float, ...]
    resolution: float
    positions: np.ndarray  # (M, 3)
    gamma_bh_db: np.ndarray  # (M,), NaN for gaps
    cache: FieldCache = field(repr=False)

    def __len__(self):
        return len(self.positions)


@dataclass
class PlacementResult:
    chosen: list[tuple[tuple[float, float, float], float]]  # (position, tx power dBm)
    objective_trace: list[float]  # coverage before placement, then after each UAV
    backhaul: list[Optional[float]] = field(default_factory=list)
    candidate_index: list[int] = field(default_factory=list)
    ground_map: Optional[CoverageMap] = None
    uavs: list[Transmitter] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def baseline(self) -> float:
        return self.objective_trace[0]

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


def backhaul_grid(scene: Scene, donor: Transmitter, altitude, resolution: float,
                  cfg: RadioConfig = RadioConfig(),
                  backhaul_pattern: Optional[Pattern3D] = None) -> CandidateGrid:
    """Donor-only backhaul SINR at every free grid node at UAV altitude.

    ``altitude`` may be a single value or a list; the grids are concatenated
    in the given order. Receivers use ``backhaul_pattern`` aimed at the donor,
    or an isotropic antenna.
    """
    alts = tuple(float(a) for a in np.atleast_1d(altitude))
    xs = grid_axis(scene.world_min[0], scene.world_max[0], resolution)
    ys = grid_axis(scene.world_min[1], scene.world_max[1], resolution)
    pts = []
    for z in alts:
        X, Y = np.meshgrid(xs, ys)
        pts.append(np.stack([X.ravel(), Y.ravel(), np.full(X.size, z)], axis=1))
    pts = np.concatenate(pts)
    pts = pts[~scene.inside_building(pts)]
    cache = FieldCache(scene, pts, cfg, backhaul_pattern, donor.position)
    mw = cache.fields([donor])[0] * 10.0 ** (donor.tx_power_dbm / 10.0)
    noise_mw = 10.0 ** (noise_power(donor.band, cfg.noise_figure_db) / 10.0)
    with np.errstate(divide="ignore"):
        gamma = np.where(mw > 0, 10.0 * np.log10(mw / noise_mw), np.nan)
    return CandidateGrid(alts, float(resolution), pts, gamma, cache)


def _make_uavs(positions, mode: Mode, tmpl: UavTemplate, band: Band) -> list[Transmitter]:
    relay_mode = "af" if mode == "ob-af" else "df"
    return [Transmitter(f"uav{i + 1}", tuple(p), "uav", band, watts_to_dbm(tmpl.max_power_w),
                        tmpl.max_power_w, tmpl.pattern, tmpl.orientation, relay_mode)
            for i, p in enumerate(positions)]


def _check_mode(mode: Mode, cfg: PlacementConfig):
    if mode not in MODES:
        raise InvalidParameterError(f"unknown relaying mode {mode!r}")
    if mode == "ob-af" and (cfg.af is None or cfg.access_band is None):
        raise InvalidParameterError("ob-af placement needs af config and access band")
    if mode == "ib-df" and cfg.df is None:
        raise InvalidParameterError("ib-df placement needs df config")


def _bands(donor: Transmitter, mode: Mode, cfg: PlacementConfig) -> list[Band]:
    return [donor.band, cfg.access_band] if mode == "ob-af" else [donor.band]


def _user_cache(scene: Scene, cfg: PlacementConfig):
    xs = grid_axis(scene.world_min[0], scene.world_max[0], cfg.user_resolution)
    ys = grid_axis(scene.world_min[1], scene.world_max[1], cfg.user_resolution)
    X, Y = np.meshgrid(xs, ys)
    pts = np.stack([X.ravel(), Y.ravel(), np.full(X.size, cfg.user_altitude)], axis=1)
    outdoor = ~scene.inside_building(pts)
    return xs, ys, outdoor, FieldCache(scene, pts[outdoor], cfg.radio)


def _relay(donor, uavs, mode, scene, cfg: PlacementConfig, cache=None):
    return apply_relaying(donor, uavs, mode, scene, af=cfg.af, df=cfg.df,
                          access_band=cfg.access_band, radio=cfg.radio, backhaul_cache=cache,
                          backhaul_pattern=cfg.backhaul_pattern)


def greedy_place(scene: Scene, donor: Transmitter, n_uavs: int, mode: Mode,
                 grid: CandidateGrid, cfg: PlacementConfig) -> PlacementResult:
    """Place UAVs one at a time, each at the candidate that maximizes ground coverage.

    Each round re-relays the already placed UAVs together with the candidate,
    so interference between UAVs and backhaul gating are reflected in the
    score. Feasible candidates are those with a backhaul path (ob-af) or, in
    ib-df, those for which every placed UAV including the candidate stays
    above the backhaul threshold. Ties go to the lower grid index.

    Placement stops early, with ``stopped_early`` set, when the best feasible
    candidate would lower the coverage reached so far.
    """
    _check_mode(mode, cfg)
    if n_uavs < 0:
        raise InvalidParameterError("n_uavs must be >= 0")
    if len(grid) == 0:
        raise InvalidParameterError("candidate grid is empty")
    bands = _bands(donor, mode, cfg)
    xs, ys, outdoor, users = _user_cache(scene, cfg)
    thr = cfg.radio.coverage_threshold_db

    def score(uavs):
        cmap = _assemble(xs, ys, cfg.user_altitude, cfg.user_resolution, outdoor,
                         [donor] + uavs, bands, cfg.radio, users)
        return coverage_fraction(cmap, "union", thr), cmap

    base_score, base_map = score([])
    result = PlacementResult([], [base_score], ground_map=base_map)
    chosen_idx: list[int] = []
    access = cfg.access_band if mode == "ob-af" else donor.band
    for _ in range(n_uavs):
        best = None
        for c in range(len(grid)):
            if c in chosen_idx:
                continue
            if mode == "ob-af" and np.isnan(grid.gamma_bh_db[c]):
                continue
            positions = [grid.positions[k] for k in chosen_idx + [c]]
            uavs = _make_uavs(positions, mode, cfg.uav, access)
            relayed, reports = _relay(donor, uavs, mode, scene, cfg, grid.cache)
            if mode == "ib-df" and not all(u.active for u in relayed):
                continue
            s, cmap = score(relayed)
            if best is None or s > best[0]:
                best = (s, c, relayed, reports, cmap)
        if best is None:
            what = ("backhaul SINR >= %g dB" % cfg.df.threshold_db if mode == "ib-df"
                    else "a backhaul path from the donor")
            raise InfeasibleError(f"no remaining candidate has {what}")
        s, c, relayed, reports, cmap = best
        if s < result.objective:
            result.stopped_early = True
            break
        chosen_idx.append(c)
        result.objective_trace.append(s)
        result.ground_map = cmap
        result.uavs = relayed
        result.candidate_index = list(chosen_idx)
        result.chosen = [(tuple(float(v) for v in u.position), u.tx_power_dbm) for u in relayed]
        result.backhaul = [r.gamma_bh_db for r in reports]
    return result


@dataclass
class PlacementEvaluation:
    ground_map: CoverageMap
    coverage: float
    backhaul: list[BackhaulReport]
    uavs: list[Transmitter]


def evaluate_placement(scene: Scene, donor: Transmitter, uav_positions: Sequence, mode: Mode,
                       cfg: PlacementConfig) -> PlacementEvaluation:
    """Relay and map a fixed set of UAV positions from scratch."""
    _check_mode(mode, cfg)
    pos = np.array(uav_positions, float).reshape(-1, 3)
    if len(pos) and scene.inside_building(pos).any():
        raise InvalidPositionError("a UAV position is inside a building")
    access = cfg.access_band if mode == "ob-af" else donor.band
    uavs = _make_uavs(pos, mode, cfg.uav, access)
    relayed, reports = _relay(donor, uavs, mode, scene, cfg)
    xs, ys, outdoor, users = _user_cache(scene, cfg)
    cmap = _assemble(xs, ys, cfg.user_altitude, cfg.user_resolution, outdoor,
                     [donor] + relayed, _bands(donor, mode, cfg), cfg.radio, users)
    return PlacementEvaluation(cmap, coverage_fraction(cmap, "union"), reports, relayed)


def placement_report(result: PlacementResult, mode: Mode, threshold_db: float) -> str:
    lines = [f"mode: {mode}", f"coverage threshold: {threshold_db:g} dB",
             f"baseline coverage: {result.baseline:.6f}"]
    for i, ((x, y, z), p) in enumerate(result.chosen):
        g = result.backhaul[i] if i < len(result.backhaul) else None
        gs = "gap" if g is None else f"{g:.4f} dB"
        ps = "idle" if not np.isfinite(p) else f"{p:.4f} dBm"
        lines.append(f"uav{i + 1}: position ({x:.3f}, {y:.3f}, {z:.3f}) m, "
                     f"tx power {ps}, backhaul SINR {gs}")
    if result.stopped_early:
        lines.append("stopped early: no remaining candidate keeps coverage from dropping")
    lines.append("objective trace: " + ", ".join(f"{v:.6f}" for v in result.objective_trace))
    return "\n".join(lines) + "\n"
