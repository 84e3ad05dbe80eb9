"""Deterministic multipath by the image method.

Paths are the direct ray plus specular reflections off building faces and the
ground, up to a maximum order. Powers of different paths add incoherently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .antenna import Orientation, Pattern3D, aimed_gain, gain, isotropic
from .errors import InvalidParameterError
from .scene import Material, Scene, segments_blocked

SPEED_OF_LIGHT = 299_792_458.0  # m/s
MAX_ORDER = 3
_PLANE_TOL = 1e-9  # m, strict side-of-plane test
_FACE_TOL = 1e-7  # m, reflection point containment slack


@dataclass(frozen=True)
class Band:
    id: str
    center_frequency: float  # Hz
    bandwidth: float  # Hz

    def __post_init__(self):
        if not (self.center_frequency > 0 and self.bandwidth > 0):
            raise InvalidParameterError(f"band {self.id}: frequency and bandwidth must be > 0")


@dataclass(frozen=True)
class PropagationPath:
    vertices: tuple[tuple[float, float, float], ...]
    reflections: tuple[tuple[int, Material], ...]  # (face index, material)
    total_length: float

    @property
    def order(self) -> int:
        return len(self.reflections)

    def gain_db(self, band: Band) -> float:
        return path_gain(self, band)


def fspl(d: float, f: float):
    """Free-space path loss ``20 log10(4 pi d f / c)`` in dB."""
    d = np.asarray(d, float)
    if np.any(~(d > 0)) or not f > 0:
        raise InvalidParameterError("fspl needs distance > 0 and frequency > 0")
    out = 20.0 * np.log10(4.0 * math.pi * d * f / SPEED_OF_LIGHT)
    return float(out) if out.ndim == 0 else out


def path_gain(path: PropagationPath, band: Band) -> float:
    loss = sum(m.loss_db(band.center_frequency) for _, m in path.reflections)
    return -fspl(path.total_length, band.center_frequency) - loss


@dataclass
class PathBatch:
    """All valid paths sharing one face sequence, for a set of receivers."""

    faces: tuple[int, ...]
    rx_index: np.ndarray  # (M,)
    points: np.ndarray  # (M, k, 3) reflection points in travel order
    length: np.ndarray  # (M,)
    departure: np.ndarray  # (M, 3) unit vector leaving the transmitter
    arrival_from: np.ndarray  # (M, 3) unit vector from receiver toward last vertex


def _front(faces, f: int, p) -> float:
    return faces.sign[f] * (p[faces.axis[f]] - faces.coord[f])


def _mirror(faces, f: int, p: np.ndarray) -> np.ndarray:
    q = p.copy()
    a = faces.axis[f]
    q[a] = 2.0 * faces.coord[f] - q[a]
    return q


# corner selectors of a box: True takes the upper bound on that axis
_CORNERS = np.array([[x, y, z] for x in (False, True) for y in (False, True) for z in (False, True)])


def _window_visible(faces, win: int, targets: np.ndarray, src: np.ndarray) -> np.ndarray:
    """Conservative test that each face in ``targets`` is seen from ``src`` through face ``win``.

    ``src`` is behind ``win``. When every corner of a target is in front of
    ``win`` the corners are projected onto the plane of ``win`` and their
    bounding box must overlap ``win``. Otherwise the target passes.
    """
    a = faces.axis[win]
    c = faces.coord[win]
    s = faces.sign[win]
    lo, hi = faces.lo[targets], faces.hi[targets]
    visible = np.ones(len(targets), bool)
    finite = np.all(np.isfinite(lo) & np.isfinite(hi), axis=1)
    corners = np.where(_CORNERS[None], hi[:, None, :], lo[:, None, :])[finite]  # (T, 8, 3)
    ahead = np.all(s * (corners[:, :, a] - c) > _PLANE_TOL, axis=1)
    corners = corners[ahead]
    t = (c - src[a]) / (corners[:, :, a] - src[a])
    proj = src + t[:, :, None] * (corners - src)
    wlo, whi = faces.lo[win], faces.hi[win]
    overlap = np.ones(len(corners), bool)
    for ax in range(3):
        if ax != a:
            overlap &= ~((proj[:, :, ax].max(axis=1) < wlo[ax] - _FACE_TOL)
                         | (proj[:, :, ax].min(axis=1) > whi[ax] + _FACE_TOL))
    sub = visible[finite]
    sub[ahead] = overlap
    visible[finite] = sub
    return visible


def image_tree(scene: Scene, tx, max_order: int, prune: bool = True):
    """Face sequences that can carry a specular path from ``tx``, with their images.

    Returns ``(faces, images)`` pairs where ``images[j]`` is ``tx`` mirrored
    across ``faces[0..j]``, sorted by length then faces. Each face must see
    the previous image on its front side; with ``prune`` set, sequences whose
    next face cannot be reached through the previous face are skipped.
    """
    faces = scene.faces
    tx = np.asarray(tx, float)
    stack = [((), [])]
    out = []
    while stack:
        seq, imgs = stack.pop()
        if seq:
            out.append((seq, imgs))
        if len(seq) == max_order:
            continue
        src = imgs[-1] if imgs else tx
        ok = faces.sign * (src[faces.axis] - faces.coord) > _PLANE_TOL
        if seq:
            prev = seq[-1]
            a, c, s = faces.axis[prev], faces.coord[prev], faces.sign[prev]
            # consecutive faces in one plane cannot both reflect
            ok &= ~((faces.axis == a) & (faces.coord == c))
            if prune:
                with np.errstate(invalid="ignore"):
                    reach = np.maximum(s * (faces.lo[:, a] - c), s * (faces.hi[:, a] - c))
                ok &= reach > _PLANE_TOL
                idx = np.flatnonzero(ok)
                ok[idx] = _window_visible(faces, prev, idx, src)
        children = [(seq + (int(f),), imgs + [_mirror(faces, int(f), src)]) for f in np.flatnonzero(ok)]
        stack.extend(reversed(children))
    out.sort(key=lambda item: (len(item[0]), item[0]))
    return out


def _backtrack(faces, seq, imgs, rx):
    """Reflection points of ``seq`` toward every receiver, or drop the receiver."""
    idx = np.arange(len(rx))
    target = rx
    pts: list[np.ndarray] = []
    for j in reversed(range(len(seq))):
        f = seq[j]
        a = faces.axis[f]
        c = faces.coord[f]
        s = faces.sign[f]
        img = imgs[j]
        ia = img[a] - c
        tb = target[:, a] - c
        ok = s * tb > _PLANE_TOL
        if not ok.all():
            idx, target, tb = idx[ok], target[ok], tb[ok]
            pts = [p[ok] for p in pts]
        if len(idx) == 0:
            return idx, []
        t = ia / (ia - tb)
        p = img + t[:, None] * (target - img)
        p[:, a] = c
        inside = np.all((p >= faces.lo[f] - _FACE_TOL) & (p <= faces.hi[f] + _FACE_TOL), axis=1)
        if not inside.all():
            idx, p = idx[inside], p[inside]
            pts = [q[inside] for q in pts]
        if len(idx) == 0:
            return idx, []
        pts.insert(0, p)
        target = p
    return idx, pts


def _unit(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / n


def trace(scene: Scene, tx, rx_points, max_order: int = 2, prune: bool = True) -> list[PathBatch]:
    """All LOS and specular paths from ``tx`` to each receiver point."""
    if not (isinstance(max_order, (int, np.integer)) and 0 <= max_order <= MAX_ORDER):
        raise InvalidParameterError(f"max_order must be an integer in [0, {MAX_ORDER}]")
    tx = np.asarray(tx, float)
    rx = np.asarray(rx_points, float).reshape(-1, 3)
    if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(rx))):
        raise InvalidParameterError("non-finite tx/rx position")
    faces = scene.faces
    batches: list[PathBatch] = []

    d = rx - tx
    dist = np.linalg.norm(d, axis=1)
    ok = dist > 0
    ok &= ~segments_blocked(scene, np.broadcast_to(tx, rx.shape), rx)
    if ok.any():
        sel = np.flatnonzero(ok)
        u = d[sel] / dist[sel, None]
        batches.append(PathBatch((), sel, np.zeros((len(sel), 0, 3)), dist[sel], u, -u))

    if max_order == 0:
        return batches
    for seq, imgs in image_tree(scene, tx, max_order, prune=prune):
        idx, pts = _backtrack(faces, seq, imgs, rx)
        if len(idx) == 0:
            continue
        chain = [np.broadcast_to(tx, pts[0].shape)] + pts + [rx[idx]]
        seg_a = np.concatenate(chain[:-1])
        seg_b = np.concatenate(chain[1:])
        blocked = segments_blocked(scene, seg_a, seg_b).reshape(len(chain) - 1, len(idx)).any(axis=0)
        if blocked.all():
            continue
        keep = ~blocked
        chain = [c[keep] for c in chain]
        seg_len = [np.linalg.norm(chain[i + 1] - chain[i], axis=1) for i in range(len(chain) - 1)]
        if any(np.any(l <= 0) for l in seg_len):
            raise InvalidParameterError("degenerate path: tx or rx lies on a reflecting face")
        batches.append(PathBatch(
            faces=seq,
            rx_index=idx[keep],
            points=np.stack(chain[1:-1], axis=1),
            length=np.sum(seg_len, axis=0),
            departure=(chain[1] - chain[0]) / seg_len[0][:, None],
            arrival_from=(chain[-2] - chain[-1]) / seg_len[-1][:, None],
        ))
    return batches


def enumerate_paths(scene: Scene, tx, rx, max_order: int = 2) -> list[PropagationPath]:
    """LOS and specular paths between two points, ordered by reflection count."""
    tx = np.asarray(tx, float)
    rx = np.asarray(rx, float)
    if np.array_equal(tx, rx):
        raise InvalidParameterError("tx and rx must differ")
    faces = scene.faces
    paths = []
    seen = set()
    for b in trace(scene, tx, rx[None], max_order):
        for m in range(len(b.rx_index)):
            verts = (tuple(tx),) + tuple(tuple(p) for p in b.points[m]) + (tuple(rx),)
            key = tuple(round(v, 9) for p in verts for v in p)
            if key in seen:
                continue
            seen.add(key)
            refl = tuple((f, scene.materials[faces.material[f]]) for f in b.faces)
            paths.append(PropagationPath(
                tuple(tuple(float(v) for v in p) for p in verts), refl, float(b.length[m])))
    return paths


def unit_field(scene: Scene, tx_pos, tx_pattern: Pattern3D, tx_orientation: Orientation,
               band: Band, rx_points, max_order: int = 2,
               rx_pattern: Optional[Pattern3D] = None,
               rx_orientation: Optional[Orientation] = None,
               rx_aim=None) -> np.ndarray:
    """Linear received power (mW) at each point for a 0 dBm transmitter.

    Zero where no path exists. The receive antenna is isotropic unless
    ``rx_pattern`` is given; it is then oriented by ``rx_orientation``, or,
    with ``rx_aim`` set, each receiver points its boresight at that point.
    """
    rx = np.asarray(rx_points, float).reshape(-1, 3)
    total = np.zeros(len(rx))
    f = band.center_frequency
    faces = scene.faces
    loss_by_material = np.array([m.loss_db(f) for m in scene.materials])
    for b in trace(scene, tx_pos, rx, max_order):
        g = -fspl(b.length, f) - loss_by_material[faces.material[list(b.faces)]].sum()
        g = g + gain(tx_pattern, tx_orientation, b.departure)
        if rx_pattern is not None and rx_aim is not None:
            g = g + aimed_gain(rx_pattern, rx[b.rx_index], rx_aim, b.arrival_from)
        elif rx_pattern is not None:
            g = g + gain(rx_pattern, rx_orientation or Orientation(), b.arrival_from)
        np.add.at(total, b.rx_index, 10.0 ** (g / 10.0))
    return total


def received_power(tx, rx, scene: Scene, band: Band, max_order: int = 2,
                   rx_pattern: Optional[Pattern3D] = None,
                   rx_orientation: Optional[Orientation] = None) -> Optional[float]:
    """Received power in dBm at ``rx`` from transmitter ``tx``, or None without a path."""
    if tx.band != band:
        raise InvalidParameterError(f"transmitter {tx.id} is on band {tx.band.id}, not {band.id}")
    mw = unit_field(scene, tx.position, tx.pattern, tx.orientation, band,
                    np.asarray(rx, float)[None], max_order,
                    rx_pattern or isotropic(), rx_orientation)[0]
    if mw <= 0:
        return None
    return tx.tx_power_dbm + 10.0 * math.log10(mw)


def path_set_key(paths: Sequence[PropagationPath]) -> list[tuple[int, float]]:
    """Sorted (order, length) pairs, for comparing path sets."""
    return sorted((p.order, p.total_length) for p in paths)
