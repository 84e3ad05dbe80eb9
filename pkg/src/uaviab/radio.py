"""Link budget, SINR and coverage maps."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence, Union

import numpy as np

from .antenna import Orientation, Pattern3D
from .errors import EmptyMapError, InvalidParameterError, InvalidPositionError, ResourceLimitError
from .raytrace import Band, unit_field
from .scene import Scene

Role = Literal["donor", "uav"]
RelayMode = Literal["none", "af", "df"]


def watts_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w * 1000.0) if p_w > 0 else -math.inf


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** (p_dbm / 10.0) / 1000.0


@dataclass(frozen=True)
class Transmitter:
    id: str
    position: tuple[float, float, float]
    role: Role
    band: Band
    tx_power_dbm: float
    max_power_w: float
    pattern: Pattern3D
    orientation: Orientation = Orientation()
    relay_mode: RelayMode = "none"
    active: bool = True

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        if not all(math.isfinite(v) for v in self.position):
            raise InvalidParameterError(f"transmitter {self.id}: non-finite position")
        if self.role not in ("donor", "uav"):
            raise InvalidParameterError(f"transmitter {self.id}: unknown role {self.role!r}")
        if self.relay_mode not in ("none", "af", "df"):
            raise InvalidParameterError(f"transmitter {self.id}: unknown relay mode {self.relay_mode!r}")
        if not self.max_power_w > 0:
            raise InvalidParameterError(f"transmitter {self.id}: max power must be > 0 W")
        if self.tx_power_dbm > watts_to_dbm(self.max_power_w) + 1e-9:
            raise InvalidParameterError(
                f"transmitter {self.id}: {self.tx_power_dbm} dBm exceeds max {self.max_power_w} W")

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)

    def field_key(self, max_order: int) -> tuple:
        return (self.position, self.band, self.pattern.key(), self.orientation, max_order)


@dataclass(frozen=True)
class RadioConfig:
    noise_figure_db: float = 7.0
    coverage_threshold_db: float = 0.0
    max_order: int = 2
    max_cells: int = 2_000_000
    workers: int = 1

    def __post_init__(self):
        if not self.noise_figure_db >= 0:
            raise InvalidParameterError("noise figure must be >= 0 dB")
        if self.workers < 1:
            raise InvalidParameterError("workers must be >= 1")


def noise_power(band: Band, nf: float) -> float:
    """Thermal noise ``-174 + 10 log10(B) + NF`` in dBm."""
    if not band.bandwidth > 0:
        raise InvalidParameterError("bandwidth must be > 0")
    return -174.0 + 10.0 * math.log10(band.bandwidth) + nf


def grid_axis(lo: float, hi: float, resolution: float) -> np.ndarray:
    """Nodes at integer multiples of ``resolution`` inside ``[lo, hi]``."""
    if not (math.isfinite(resolution) and resolution > 0):
        raise InvalidParameterError("resolution must be > 0")
    k0 = math.ceil(lo / resolution - 1e-9)
    k1 = math.floor(hi / resolution + 1e-9)
    if k1 < k0:
        raise InvalidParameterError(f"no grid node of spacing {resolution} in [{lo}, {hi}]")
    return resolution * np.arange(k0, k1 + 1, dtype=float)


class FieldCache:
    """Memo of per-transmitter unit fields over a fixed set of receiver points.

    Keys are the transmitter geometry, band, pattern and orientation, so a
    transmitter reused at a different power costs nothing to re-evaluate.
    The receive antenna is isotropic unless ``rx_pattern`` is set, in which
    case every receiver aims it at ``rx_aim``.
    """

    def __init__(self, scene: Scene, points: np.ndarray, cfg: RadioConfig,
                 rx_pattern: Optional[Pattern3D] = None, rx_aim=None):
        self.scene = scene
        self.points = np.asarray(points, float).reshape(-1, 3)
        self.cfg = cfg
        self.rx_pattern = rx_pattern
        self.rx_aim = None if rx_aim is None else tuple(float(v) for v in rx_aim)
        self._store: dict[tuple, np.ndarray] = {}

    def __len__(self):
        return len(self._store)

    def fields(self, txs: Sequence[Transmitter]) -> list[np.ndarray]:
        keys = [t.field_key(self.cfg.max_order) for t in txs]
        missing = []
        for k, t in zip(keys, txs):
            if k not in self._store and k not in [m[0] for m in missing]:
                missing.append((k, t))
        if missing:
            args = [(self.scene, t.position, t.pattern, t.orientation, t.band, self.points,
                     self.cfg.max_order, self.rx_pattern, None, self.rx_aim) for _, t in missing]
            if self.cfg.workers > 1 and len(missing) > 1:
                with ProcessPoolExecutor(max_workers=self.cfg.workers) as pool:
                    results = list(pool.map(_unit_field_star, args))
            else:
                results = [_unit_field_star(a) for a in args]
            for (k, _), r in zip(missing, results):
                self._store[k] = r
        return [self._store[k] for k in keys]


def _unit_field_star(args):
    return unit_field(*args)


def _sinr(powers_mw: np.ndarray, noise_mw: float):
    """SINR (dB) and serving row for stacked linear powers, shape (K, N).

    Rows must already be sorted by transmitter id so that ``argmax`` resolves
    ties toward the lowest id. Columns without any power are gaps (NaN, -1).
    """
    n = powers_mw.shape[1]
    if powers_mw.shape[0] == 0:
        return np.full(n, np.nan), np.full(n, -1)
    serving = np.argmax(powers_mw, axis=0)
    signal = powers_mw[serving, np.arange(n)]
    interference = powers_mw.sum(axis=0) - signal
    with np.errstate(divide="ignore"):
        sinr = 10.0 * np.log10(signal / (noise_mw + interference))
    gap = signal <= 0
    sinr[gap] = np.nan
    serving = np.where(gap, -1, serving)
    return sinr, serving


def _powers_mw(txs: Sequence[Transmitter], fields: Sequence[np.ndarray]) -> np.ndarray:
    if not txs:
        return np.zeros((0, 0))
    return np.stack([f * 10.0 ** (t.tx_power_dbm / 10.0) for t, f in zip(txs, fields)])


def _band_txs(txs: Iterable[Transmitter], band: Band) -> list[Transmitter]:
    return sorted((t for t in txs if t.active and t.band == band), key=lambda t: t.id)


@dataclass(frozen=True)
class SinrResult:
    sinr_db: Optional[float]  # None is a gap
    serving_tx: Optional[str]


def sinr_at(point, txs: Sequence[Transmitter], band: Band, scene: Scene,
            cfg: RadioConfig = RadioConfig()) -> SinrResult:
    """SINR on ``band`` at one point; the strongest active in-band transmitter serves."""
    p = np.asarray(point, float).reshape(1, 3)
    if scene.inside_building(p)[0]:
        raise InvalidPositionError(f"point {tuple(p[0])} is inside a building")
    active = _band_txs(txs, band)
    if not active:
        return SinrResult(None, None)
    fields = FieldCache(scene, p, replace(cfg, workers=1)).fields(active)
    sinr, serving = _sinr(_powers_mw(active, fields), 10.0 ** (noise_power(band, cfg.noise_figure_db) / 10))
    if serving[0] < 0:
        return SinrResult(None, None)
    return SinrResult(float(sinr[0]), active[serving[0]].id)


def signal_sinr_at(point, signal_tx: Transmitter, interferers: Sequence[Transmitter],
                   scene: Scene, cfg: RadioConfig = RadioConfig()) -> Optional[float]:
    """SINR of a fixed transmitter at ``point``, treating active in-band others as interference.

    None when ``signal_tx`` has no path to the point.
    """
    p = np.asarray(point, float).reshape(1, 3)
    band = signal_tx.band
    others = [t for t in _band_txs(interferers, band) if t.id != signal_tx.id]
    fields = FieldCache(scene, p, replace(cfg, workers=1)).fields([signal_tx] + others)
    powers = _powers_mw([signal_tx] + others, fields)[:, 0]
    if powers[0] <= 0:
        return None
    noise = 10.0 ** (noise_power(band, cfg.noise_figure_db) / 10.0)
    return float(10.0 * np.log10(powers[0] / (noise + powers[1:].sum())))


@dataclass(eq=False)
class CoverageMap:
    """Per-cell received powers and per-band SINR on a horizontal grid.

    ``rx_power_dbm`` is ``-inf`` where a transmitter has no path; ``sinr_db`` is
    NaN in gaps. Cells inside buildings are masked out by ``outdoor`` and hold
    NaN everywhere.
    """

    xs: np.ndarray
    ys: np.ndarray
    altitude: float
    resolution: float
    outdoor: np.ndarray  # (ny, nx)
    tx_ids: tuple[str, ...]
    bands: dict[str, Band]
    rx_power_dbm: dict[str, np.ndarray]
    sinr_db: dict[str, np.ndarray]
    serving: dict[str, np.ndarray]  # index into tx_ids, -1 for none
    threshold_db: float = 0.0
    tx_band: dict[str, str] = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.outdoor.shape

    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.xs, self.ys)
        return np.stack([X.ravel(), Y.ravel(), np.full(X.size, float(self.altitude))], axis=1)

    def band_key(self, band) -> str:
        key = band.id if isinstance(band, Band) else band
        if key != "union" and key not in self.sinr_db:
            raise InvalidParameterError(f"map has no band {key!r}")
        return key

    def best_sinr(self, band="union") -> np.ndarray:
        """SINR on one band, or the per-cell maximum over all bands for ``"union"``."""
        key = self.band_key(band)
        if key != "union":
            return self.sinr_db[key]
        stack = np.stack([self.sinr_db[b] for b in sorted(self.sinr_db)])
        out = np.full(self.shape, np.nan)
        have = ~np.all(np.isnan(stack), axis=0)
        out[have] = np.nanmax(stack[:, have], axis=0)
        return out

    def serving_id(self, band, iy: int, ix: int) -> Optional[str]:
        k = int(self.serving[self.band_key(band)][iy, ix])
        return None if k < 0 else self.tx_ids[k]

    def same_grid(self, other: "CoverageMap") -> bool:
        return (np.array_equal(self.xs, other.xs) and np.array_equal(self.ys, other.ys)
                and self.altitude == other.altitude)


def coverage_map(scene: Scene, txs: Sequence[Transmitter], band: Union[Band, Sequence[Band]],
                 altitude: float, resolution: float, cfg: RadioConfig = RadioConfig(),
                 cache: Optional[FieldCache] = None, rx_pattern: Optional[Pattern3D] = None,
                 rx_aim=None) -> CoverageMap:
    """Evaluate SINR for one or more bands on the grid over the scene's footprint."""
    bands = [band] if isinstance(band, Band) else list(band)
    xs = grid_axis(scene.world_min[0], scene.world_max[0], resolution)
    ys = grid_axis(scene.world_min[1], scene.world_max[1], resolution)
    if len(xs) * len(ys) > cfg.max_cells:
        raise ResourceLimitError(
            f"grid of {len(xs)}x{len(ys)} cells exceeds the budget of {cfg.max_cells}")
    X, Y = np.meshgrid(xs, ys)
    pts = np.stack([X.ravel(), Y.ravel(), np.full(X.size, float(altitude))], axis=1)
    outdoor = ~scene.inside_building(pts)
    if cache is None:
        cache = FieldCache(scene, pts[outdoor], cfg, rx_pattern, rx_aim)
    elif len(cache.points) != int(outdoor.sum()) or not np.array_equal(cache.points, pts[outdoor]):
        raise InvalidParameterError("field cache was built for a different grid")
    return _assemble(xs, ys, altitude, resolution, outdoor, txs, bands, cfg, cache)


def _assemble(xs, ys, altitude, resolution, outdoor, txs, bands, cfg, cache) -> CoverageMap:
    shape = (len(ys), len(xs))
    flat_out = outdoor.ravel()
    ordered = sorted(txs, key=lambda t: t.id)
    ids = tuple(t.id for t in ordered)
    rx_power = {}
    active = [t for t in ordered if t.active and t.band in bands]
    fields = dict(zip((t.id for t in active), cache.fields(active)))
    for t in ordered:
        arr = np.full(flat_out.size, np.nan)
        if t.id in fields:
            with np.errstate(divide="ignore"):
                arr[flat_out] = t.tx_power_dbm + 10.0 * np.log10(fields[t.id])
        else:
            arr[flat_out] = -np.inf
        rx_power[t.id] = arr.reshape(shape)
    sinr, serving = {}, {}
    for b in bands:
        band_txs = [t for t in active if t.band == b]
        s = np.full(flat_out.size, np.nan)
        v = np.full(flat_out.size, -1)
        if band_txs:
            noise_mw = 10.0 ** (noise_power(b, cfg.noise_figure_db) / 10.0)
            ss, vv = _sinr(_powers_mw(band_txs, [fields[t.id] for t in band_txs]), noise_mw)
            s[flat_out] = ss
            id_idx = np.array([ids.index(t.id) for t in band_txs])
            v[flat_out] = np.where(vv >= 0, id_idx[np.maximum(vv, 0)], -1)
        sinr[b.id] = s.reshape(shape)
        serving[b.id] = v.reshape(shape)
    return CoverageMap(xs=np.asarray(xs), ys=np.asarray(ys), altitude=float(altitude),
                       resolution=float(resolution), outdoor=outdoor.reshape(shape), tx_ids=ids,
                       bands={b.id: b for b in bands}, rx_power_dbm=rx_power, sinr_db=sinr,
                       serving=serving, threshold_db=cfg.coverage_threshold_db,
                       tx_band={t.id: t.band.id for t in ordered})


def coverage_fraction(cmap: CoverageMap, band="union", threshold_db: Optional[float] = None) -> float:
    """Fraction of outdoor cells whose SINR is at least ``threshold_db``."""
    n = int(cmap.outdoor.sum())
    if n == 0:
        raise EmptyMapError("map has no outdoor cells")
    thr = cmap.threshold_db if threshold_db is None else threshold_db
    s = cmap.best_sinr(band)[cmap.outdoor]
    with np.errstate(invalid="ignore"):
        return float(np.count_nonzero(s >= thr)) / n


def _fmt(v: float) -> str:
    return "" if not np.isfinite(v) else f"{v:.6f}"


def write_csv(cmap: CoverageMap, path: Union[str, Path]) -> None:
    band_ids = sorted(cmap.sinr_db)
    header = ["x_m", "y_m", "z_m"] + [f"rx_{t}_dbm" for t in cmap.tx_ids]
    header += [f"sinr_{b}_db" for b in band_ids] + [f"serving_{b}" for b in band_ids]
    lines = [",".join(header)]
    ny, nx = cmap.shape
    for iy in range(ny):
        for ix in range(nx):
            row = [_fmt(cmap.xs[ix]), _fmt(cmap.ys[iy]), _fmt(cmap.altitude)]
            row += [_fmt(cmap.rx_power_dbm[t][iy, ix]) for t in cmap.tx_ids]
            row += [_fmt(cmap.sinr_db[b][iy, ix]) for b in band_ids]
            row += [cmap.serving_id(b, iy, ix) or "" for b in band_ids]
            lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_pgm(cmap: CoverageMap, path: Union[str, Path], band="union",
              db_min: float = -10.0, db_max: float = 40.0) -> None:
    """Plain (P2) grayscale image of SINR, north up; gaps and buildings are black."""
    if not db_max > db_min:
        raise InvalidParameterError("db_max must exceed db_min")
    s = cmap.best_sinr(band)
    level = np.zeros(s.shape, int)
    ok = np.isfinite(s)
    level[ok] = np.clip(np.round(1 + 254 * (s[ok] - db_min) / (db_max - db_min)), 1, 255).astype(int)
    level = level[::-1]
    ny, nx = level.shape
    out = ["P2", f"# sinr_db range {db_min:g} {db_max:g} band {cmap.band_key(band)}", f"{nx} {ny}", "255"]
    out += [" ".join(str(v) for v in row) for row in level]
    Path(path).write_text("\n".join(out) + "\n")

