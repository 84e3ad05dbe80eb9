"""Urban scene: extruded rectangular buildings over an opaque ground plane.

Buildings are axis-aligned boxes standing on the ground. They are opaque, so
a segment that enters any building interior is blocked. The ground is an
infinite plane at ``ground_z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import InvalidParameterError

RAY_EPS = 1e-4  # m, ray-offset tolerance


@dataclass(frozen=True)
class Material:
    """Surface material with a fixed reflection loss per frequency.

    ``reflection_loss_db`` holds ``(frequency_ghz, loss_db)`` pairs sorted by
    frequency. Frequencies between table entries are interpolated linearly,
    outside the table the nearest entry is used.
    """

    name: str
    reflection_loss_db: tuple[tuple[float, float], ...]

    def __post_init__(self):
        table = tuple(sorted((float(f), float(l)) for f, l in self.reflection_loss_db))
        if not table:
            raise InvalidParameterError(f"material {self.name!r} has no reflection losses")
        for f, loss in table:
            if not (math.isfinite(f) and f > 0 and math.isfinite(loss) and loss >= 0):
                raise InvalidParameterError(
                    f"material {self.name!r}: reflection loss must be >= 0 dB (got {loss} at {f} GHz)")
        object.__setattr__(self, "reflection_loss_db", table)

    @classmethod
    def from_table(cls, name: str, losses_by_ghz: Mapping[float, float]) -> "Material":
        return cls(name, tuple(losses_by_ghz.items()))

    def loss_db(self, frequency_hz: float) -> float:
        ghz = frequency_hz / 1e9
        freqs = [f for f, _ in self.reflection_loss_db]
        losses = [l for _, l in self.reflection_loss_db]
        return float(np.interp(ghz, freqs, losses))


# Configuration defaults, not measured values.
CONCRETE = Material.from_table("concrete", {30.0: 10.0, 60.0: 13.0})
GLASS = Material.from_table("glass", {30.0: 7.0, 60.0: 9.0})


@dataclass(frozen=True)
class Building:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    height: float
    material: Material = CONCRETE

    def __post_init__(self):
        vals = (self.x_min, self.x_max, self.y_min, self.y_max, self.height)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameterError(f"non-finite building geometry: {vals}")
        if self.height <= 0:
            raise InvalidParameterError(f"building height must be > 0, got {self.height}")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise InvalidParameterError(f"degenerate building footprint: {vals[:4]}")

    def contains_xy(self, x, y):
        return (x > self.x_min) & (x < self.x_max) & (y > self.y_min) & (y < self.y_max)


@dataclass(frozen=True)
class Hit:
    t: float
    point: tuple[float, float, float]
    face_normal: tuple[float, float, float]
    material: Material


@dataclass(frozen=True, eq=False)
class Scene:
    """Immutable set of buildings plus ground and world bounds.

    Face arrays (one row per reflecting face, ground first) are derived once
    at construction and shared by every query.
    """

    buildings: tuple[Building, ...]
    world_min: tuple[float, float, float]
    world_max: tuple[float, float, float]
    ground_z: float = 0.0
    ground_material: Material = CONCRETE
    eps: float = RAY_EPS

    # derived
    box_lo: np.ndarray = field(init=False, repr=False)
    box_hi: np.ndarray = field(init=False, repr=False)
    materials: tuple[Material, ...] = field(init=False, repr=False)
    faces: "FaceTable" = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "buildings", tuple(self.buildings))
        object.__setattr__(self, "world_min", tuple(float(v) for v in self.world_min))
        object.__setattr__(self, "world_max", tuple(float(v) for v in self.world_max))
        coords = list(self.world_min) + list(self.world_max) + [self.ground_z, self.eps]
        if not all(math.isfinite(v) for v in coords):
            raise InvalidParameterError("non-finite world bounds")
        if any(hi <= lo for lo, hi in zip(self.world_min, self.world_max)):
            raise InvalidParameterError("world bounds must have positive extent")
        for b in self.buildings:
            if (b.x_min < self.world_min[0] or b.x_max > self.world_max[0]
                    or b.y_min < self.world_min[1] or b.y_max > self.world_max[1]):
                raise InvalidParameterError(f"building outside world bounds: {b}")
        n = len(self.buildings)
        lo = np.array([[b.x_min, b.y_min, self.ground_z] for b in self.buildings], float).reshape(n, 3)
        hi = np.array([[b.x_max, b.y_max, self.ground_z + b.height] for b in self.buildings],
                      float).reshape(n, 3)
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)
        mats: list[Material] = [self.ground_material]
        for b in self.buildings:
            if b.material not in mats:
                mats.append(b.material)
        object.__setattr__(self, "materials", tuple(mats))
        object.__setattr__(self, "faces", FaceTable.build(self))

    @property
    def n_buildings(self) -> int:
        return len(self.buildings)

    def inside_building(self, points) -> np.ndarray:
        """Boolean mask of points strictly inside any building volume."""
        p = np.asarray(points, float).reshape(-1, 3)
        if self.n_buildings == 0:
            return np.zeros(len(p), bool)
        inside = (p[:, None, :] > self.box_lo[None]) & (p[:, None, :] < self.box_hi[None])
        return inside.all(axis=2).any(axis=1)

    def in_bounds(self, points) -> np.ndarray:
        p = np.asarray(points, float).reshape(-1, 3)
        lo = np.array(self.world_min)
        hi = np.array(self.world_max)
        return ((p >= lo) & (p <= hi)).all(axis=1)

    def max_height(self) -> float:
        return max((b.height for b in self.buildings), default=0.0)


@dataclass(frozen=True, eq=False)
class FaceTable:
    """Reflecting faces as parallel arrays.

    A face lies in the plane ``p[axis] == coord`` with outward normal
    ``sign * e_axis`` and spans ``[lo, hi]`` on the other two axes.
    Row 0 is the ground plane.
    """

    axis: np.ndarray
    coord: np.ndarray
    sign: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    material: np.ndarray
    building: np.ndarray

    def __len__(self):
        return len(self.axis)

    @classmethod
    def build(cls, scene: Scene) -> "FaceTable":
        axis, coord, sign, lo, hi, mat, bld = [], [], [], [], [], [], []
        inf = np.inf

        def add(a, c, s, l, h, m, b):
            axis.append(a), coord.append(c), sign.append(s)
            lo.append(l), hi.append(h), mat.append(m), bld.append(b)

        add(2, scene.ground_z, 1.0, (-inf, -inf, scene.ground_z), (inf, inf, scene.ground_z), 0, -1)
        for k, b in enumerate(scene.buildings):
            m = scene.materials.index(b.material)
            z0, z1 = scene.ground_z, scene.ground_z + b.height
            add(0, b.x_min, -1.0, (b.x_min, b.y_min, z0), (b.x_min, b.y_max, z1), m, k)
            add(0, b.x_max, 1.0, (b.x_max, b.y_min, z0), (b.x_max, b.y_max, z1), m, k)
            add(1, b.y_min, -1.0, (b.x_min, b.y_min, z0), (b.x_max, b.y_min, z1), m, k)
            add(1, b.y_max, 1.0, (b.x_min, b.y_max, z0), (b.x_max, b.y_max, z1), m, k)
            add(2, z1, 1.0, (b.x_min, b.y_min, z1), (b.x_max, b.y_max, z1), m, k)
        return cls(np.array(axis, int), np.array(coord, float), np.array(sign, float),
                   np.array(lo, float), np.array(hi, float), np.array(mat, int), np.array(bld, int))

    def normal(self, i: int) -> tuple[float, float, float]:
        n = [0.0, 0.0, 0.0]
        n[int(self.axis[i])] = float(self.sign[i])
        return tuple(n)


def _axis_starts(area: float, block: float, street: float) -> list[tuple[float, float]]:
    """Block intervals along one axis; street centerlines sit on multiples of the pitch."""
    pitch = block + street
    half = area / 2
    kmax = int(math.ceil(half / pitch)) + 1
    out = []
    for k in range(-kmax, kmax + 1):
        lo = k * pitch + street / 2
        hi = lo + block
        lo, hi = max(lo, -half), min(hi, half)
        if hi - lo > 1e-9:
            out.append((lo, hi))
    return out


def gen_manhattan(area_x: float, area_y: float, block_x: float, block_y: float,
                  street_w: float, h_min: float, h_max: float, seed: int,
                  glass_fraction: float = 0.5,
                  concrete: Material = CONCRETE, glass: Material = GLASS,
                  ground_z: float = 0.0, z_max: Optional[float] = None) -> Scene:
    """Generate a rectilinear street grid centered on the origin.

    Street centerlines lie on ``x = i*(block_x+street_w)`` and
    ``y = j*(block_y+street_w)``, so both axes through the origin are streets
    and the origin is a four-way intersection. Blocks that straddle the area
    edge are clipped to it. Heights are uniform in ``[h_min, h_max]`` and each
    building is glass with probability ``glass_fraction``.
    """
    dims = dict(area_x=area_x, area_y=area_y, block_x=block_x, block_y=block_y,
                street_w=street_w, h_min=h_min, h_max=h_max)
    for name, v in dims.items():
        if not (math.isfinite(v) and v > 0):
            raise InvalidParameterError(f"{name} must be a finite value > 0, got {v}")
    if h_min > h_max:
        raise InvalidParameterError(f"h_min ({h_min}) > h_max ({h_max})")
    if block_x + street_w > area_x or block_y + street_w > area_y:
        raise InvalidParameterError("block plus street does not fit inside the area")
    if not 0.0 <= glass_fraction <= 1.0:
        raise InvalidParameterError(f"glass_fraction must be in [0, 1], got {glass_fraction}")

    rng = np.random.default_rng(seed)
    xs = _axis_starts(area_x, block_x, street_w)
    ys = _axis_starts(area_y, block_y, street_w)
    buildings = []
    for y0, y1 in ys:
        for x0, x1 in xs:
            h = float(rng.uniform(h_min, h_max))
            mat = glass if rng.random() < glass_fraction else concrete
            buildings.append(Building(x0, x1, y0, y1, h, mat))
    top = z_max if z_max is not None else max(2.0 * h_max, h_max + 200.0)
    return Scene(tuple(buildings), (-area_x / 2, -area_y / 2, ground_z),
                 (area_x / 2, area_y / 2, ground_z + top), ground_z=ground_z,
                 ground_material=concrete)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InvalidParameterError("non-finite geometry input")


def ray_hit(scene: Scene, origin, direction, max_t: float) -> Optional[Hit]:
    """Nearest intersection of a ray with a building face or the ground.

    Only hits with ``eps < t <= max_t`` count, so a ray leaving a surface does
    not hit that surface again.
    """
    o = np.asarray(origin, float)
    d = np.asarray(direction, float)
    _check_finite(o, d, np.array([max_t]))
    if max_t <= 0:
        raise InvalidParameterError("max_t must be > 0")
    norm = np.linalg.norm(d)
    if abs(norm - 1.0) > 1e-6:
        raise InvalidParameterError("direction must be a unit vector")
    d = np.where(np.abs(d) < 1e-12, 0.0, d)  # treat vanishing components as parallel
    eps = scene.eps

    best_t = np.inf
    best_normal = None
    best_mat = None
    if d[2] < 0 and o[2] > scene.ground_z:
        t = (scene.ground_z - o[2]) / d[2]
        if eps < t <= max_t:
            best_t, best_normal, best_mat = t, (0.0, 0.0, 1.0), scene.ground_material

    if scene.n_buildings:
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            t1 = (scene.box_lo - o) * inv
            t2 = (scene.box_hi - o) * inv
        parallel = d == 0
        # parallel axes: inside slab -> (-inf, inf), else empty
        inside_slab = (o > scene.box_lo) & (o < scene.box_hi)
        tnear = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), np.minimum(t1, t2))
        tfar = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), np.maximum(t1, t2))
        enter_axis = np.argmax(tnear, axis=1)
        exit_axis = np.argmin(tfar, axis=1)
        t_in = tnear.max(axis=1)
        t_out = tfar.min(axis=1)
        valid = t_in <= t_out
        for k in np.flatnonzero(valid):
            if t_in[k] > eps:
                t, ax, outward = t_in[k], enter_axis[k], -np.sign(d[enter_axis[k]])
            elif t_out[k] > eps:
                t, ax, outward = t_out[k], exit_axis[k], np.sign(d[exit_axis[k]])
            else:
                continue
            if t <= max_t and t < best_t:
                n = [0.0, 0.0, 0.0]
                n[ax] = float(outward)
                best_t, best_normal, best_mat = t, tuple(n), scene.buildings[k].material
    if best_normal is None:
        return None
    p = o + best_t * d
    return Hit(float(best_t), tuple(float(v) for v in p), best_normal, best_mat)


def segments_blocked(scene: Scene, a, b, chunk: int = 4096) -> np.ndarray:
    """Vectorized occlusion test for segments ``a[i] -> b[i]``.

    A segment is blocked if it passes through the interior of any building
    shrunk by ``eps`` or dips below the ground. Endpoints resting on a face
    do not block.
    """
    a = np.asarray(a, float).reshape(-1, 3)
    b = np.asarray(b, float).reshape(-1, 3)
    eps = scene.eps
    blocked = (a[:, 2] < scene.ground_z - eps) | (b[:, 2] < scene.ground_z - eps)
    if scene.n_buildings == 0 or len(a) == 0:
        return blocked
    lo = scene.box_lo + eps
    hi = scene.box_hi - eps
    for s in range(0, len(a), chunk):
        aa = a[s:s + chunk, None, :]
        dd = b[s:s + chunk, None, :] - aa
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo[None] - aa) / dd
            t2 = (hi[None] - aa) / dd
        par = dd == 0
        inside = (aa > lo[None]) & (aa < hi[None])
        tnear = np.where(par, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
        tfar = np.where(par, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
        t0 = np.maximum(tnear.max(axis=2), 0.0)
        t1_ = np.minimum(tfar.min(axis=2), 1.0)
        blocked[s:s + chunk] |= (t0 < t1_).any(axis=1)
    return blocked


def los(scene: Scene, a, b) -> bool:
    """True iff the open segment between ``a`` and ``b`` is unobstructed."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    _check_finite(a, b)
    if np.array_equal(a, b):
        raise InvalidParameterError("los endpoints must differ")
    return not bool(segments_blocked(scene, a, b)[0])

