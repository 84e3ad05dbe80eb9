"""Scenario files: YAML with explicit units in key names.

A scenario is merged over ``DEFAULTS``; the fully resolved mapping is what the
CLI writes back as the run manifest, so a manifest is itself a valid scenario.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import yaml

from .antenna import (Orientation, Pattern3D, horn_pattern, load_cut, peak_gain_from_beamwidths,
                      synthesize_3d)
from .errors import InvalidParameterError
from .placement import PlacementConfig, UavTemplate
from .radio import RadioConfig, Transmitter, watts_to_dbm
from .raytrace import Band
from .relay import MODES, AfConfig, DfConfig
from .scene import Building, Material, Scene, gen_manhattan


class ConfigError(InvalidParameterError):
    """Scenario parse or validation failure, tagged with the offending field."""

    def __init__(self, where: str, msg: str):
        super().__init__(f"{where}: {msg}")
        self.where = where


DEFAULTS: dict[str, Any] = {
    "name": "scenario",
    "seed": 7,
    "scene": {
        "generator": {
            "area_x_m": 1500.0, "area_y_m": 460.0,
            "block_x_m": 110.0, "block_y_m": 100.0, "street_w_m": 30.0,
            "h_min_m": 80.0, "h_max_m": 120.0, "glass_fraction": 0.5,
        },
        "buildings": None,
        "world_m": None,
        "ground_z_m": 0.0,
        "ray_eps_m": 1e-4,
        "materials": {
            "concrete": {"reflection_loss_db": {30.0: 10.0, 60.0: 13.0}},
            "glass": {"reflection_loss_db": {30.0: 7.0, 60.0: 9.0}},
        },
    },
    "bands": {
        "f1": {"frequency_ghz": 30.0, "bandwidth_mhz": 100.0},
        "f2": {"frequency_ghz": 60.0, "bandwidth_mhz": 100.0},
    },
    "antenna": {
        "beamwidth_deg": 30.0, "sidelobe_floor_db": -20.0, "peak_gain_dbi": None,
        "azimuth_cut_file": None, "elevation_cut_file": None,
    },
    "transmitters": [],
    "radio": {
        "noise_figure_db": 7.0, "coverage_threshold_db": 0.0, "max_order": 2,
        "user_altitude_m": 1.5, "user_resolution_m": 10.0, "max_cells": 2_000_000, "workers": 1,
    },
    "relay": {
        "mode": "ob-af", "p_max_w": 5.0, "gamma_u_max_db": 50.0, "df_threshold_db": 15.0,
        "backhaul_antenna": "horn",
    },
    "placement": {
        "n_uavs": 2, "altitudes_m": [200.0], "resolution_m": 200.0,
        "uav_max_power_w": 5.0, "uav_azimuth_deg": 0.0, "uav_downtilt_deg": 90.0,
    },
    "reference": {"coverage_gain": None},
    "output": {"pgm_min_db": -10.0, "pgm_max_db": 40.0},
}

TX_DEFAULTS: dict[str, Any] = {
    "id": None, "role": None, "position_m": None, "band": "f1", "power_w": None,
    "max_power_w": None, "azimuth_deg": 0.0, "downtilt_deg": 0.0, "relay_mode": None,
}

BUILDING_KEYS = {"x_min_m", "x_max_m", "y_min_m", "y_max_m", "height_m", "material"}
# mappings whose keys are user data rather than schema
_FREE_KEYS = {"scene.materials", "bands", "reference"}


def _merge(base: Any, over: Any, where: str) -> Any:
    if isinstance(base, dict) and where not in _FREE_KEYS:
        if over is None:
            return copy.deepcopy(base)
        if not isinstance(over, dict):
            raise ConfigError(where or "<root>", "expected a mapping")
        unknown = sorted(set(over) - set(base))
        if unknown:
            raise ConfigError(f"{where + '.' if where else ''}{unknown[0]}", "unknown key")
        return {k: _merge(base[k], over.get(k, base[k]) if k in over else None, _join(where, k))
                if isinstance(base[k], dict) else copy.deepcopy(over.get(k, base[k]))
                for k in base}
    return copy.deepcopy(over if over is not None else base)


def _join(a: str, b: str) -> str:
    return f"{a}.{b}" if a else str(b)


def _set_path(cfg: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node: Any = cfg
    for i, p in enumerate(parts[:-1]):
        if isinstance(node, list):
            try:
                node = node[int(p)]
            except (ValueError, IndexError):
                raise ConfigError(".".join(parts[:i + 1]), "no such list element") from None
        elif isinstance(node, dict) and p in node and isinstance(node[p], (dict, list)):
            node = node[p]
        else:
            raise ConfigError(".".join(parts[:i + 1]), "not a mapping or list")
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError):
            raise ConfigError(dotted, "no such list element") from None
    elif isinstance(node, dict):
        if last not in node and ".".join(parts[:-1]) not in _FREE_KEYS:
            raise ConfigError(dotted, "unknown key")
        node[last] = value
    else:
        raise ConfigError(dotted, "not a mapping")


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    try:
        return key.strip(), yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(key, f"cannot parse value {raw!r}: {exc}") from None


def builtin_scenario(name: str) -> Path:
    path = resources.files("uaviab") / "scenarios" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError("--scenario", f"no built-in scenario {name!r}")
    return Path(str(path))


def load_raw(path: str | Path) -> dict:
    text = str(path)
    if text.startswith("builtin:"):
        path = builtin_scenario(text.split(":", 1)[1])
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        raise ConfigError(loc, f"YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a mapping")
    return data


def resolve(raw: dict, overrides: Optional[list[tuple[str, Any]]] = None) -> dict:
    """Merge defaults, the scenario file and overrides; fill per-transmitter defaults."""
    cfg = _merge(DEFAULTS, raw, "")
    for key, value in overrides or []:
        _set_path(cfg, key, value)
    txs = cfg.get("transmitters") or []
    if not isinstance(txs, list):
        raise ConfigError("transmitters", "expected a list")
    resolved_txs = []
    for i, t in enumerate(txs):
        where = f"transmitters.{i}"
        if not isinstance(t, dict):
            raise ConfigError(where, "expected a mapping")
        unknown = sorted(set(t) - set(TX_DEFAULTS))
        if unknown:
            raise ConfigError(f"{where}.{unknown[0]}", "unknown key")
        r = {**TX_DEFAULTS, **t}
        if r["role"] == "uav":
            r["relay_mode"] = r["relay_mode"] or ("af" if cfg["relay"]["mode"] == "ob-af" else "df")
            if r["power_w"] is None:
                r["power_w"] = r["max_power_w"] if r["max_power_w"] is not None \
                    else cfg["placement"]["uav_max_power_w"]
        else:
            r["relay_mode"] = r["relay_mode"] or "none"
        if r["max_power_w"] is None:
            r["max_power_w"] = r["power_w"]
        resolved_txs.append(r)
    cfg["transmitters"] = resolved_txs
    if cfg["scene"]["buildings"] is not None:
        cfg["scene"]["generator"] = None
    return cfg


def _num(v, where: str, positive: bool = False, allow_none: bool = False) -> Optional[float]:
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(where, f"expected a finite number, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(where, f"must be > 0, got {v}")
    return float(v)


@dataclass
class Scenario:
    """Validated, ready-to-run experiment built from a resolved config."""

    config: dict
    scene: Scene
    bands: dict[str, Band]
    pattern: Pattern3D
    donor: Transmitter
    uavs: list[Transmitter]
    radio: RadioConfig
    mode: str
    af: AfConfig
    df: DfConfig
    placement: PlacementConfig

    @property
    def access_band(self) -> Optional[Band]:
        return self.bands.get("f2") if self.mode == "ob-af" else self.donor.band

    def transmitters(self) -> list[Transmitter]:
        return [self.donor] + self.uavs

    def manifest_text(self) -> str:
        return yaml.safe_dump(self.config, sort_keys=True, default_flow_style=False)


def _build_scene(cfg: dict, seed: int) -> Scene:
    sc = cfg["scene"]
    materials = {}
    for name, spec in (sc["materials"] or {}).items():
        where = f"scene.materials.{name}"
        if not isinstance(spec, dict) or "reflection_loss_db" not in spec:
            raise ConfigError(where, "needs reflection_loss_db")
        try:
            table = {_num(f, where, positive=True): _num(l, where)
                     for f, l in spec["reflection_loss_db"].items()}
            materials[name] = Material.from_table(str(name), table)
        except (InvalidParameterError, AttributeError) as exc:
            raise ConfigError(where, str(exc)) from None
    if "concrete" not in materials:
        raise ConfigError("scene.materials", "a 'concrete' material is required (ground)")
    ground_z = _num(sc["ground_z_m"], "scene.ground_z_m")
    eps = _num(sc["ray_eps_m"], "scene.ray_eps_m", positive=True)
    try:
        if sc["buildings"] is not None:
            blds = []
            for i, b in enumerate(sc["buildings"]):
                where = f"scene.buildings.{i}"
                if not isinstance(b, dict) or set(b) - BUILDING_KEYS:
                    raise ConfigError(where, f"keys must be among {sorted(BUILDING_KEYS)}")
                mat = b.get("material", "concrete")
                if mat not in materials:
                    raise ConfigError(f"{where}.material", f"unknown material {mat!r}")
                blds.append(Building(*(_num(b[k], f"{where}.{k}") for k in
                                       ("x_min_m", "x_max_m", "y_min_m", "y_max_m", "height_m")),
                                     material=materials[mat]))
            world = sc["world_m"]
            if world is None:
                raise ConfigError("scene.world_m", "explicit buildings need world_m {min: [x,y,z], max: [x,y,z]}")
            return Scene(tuple(blds), tuple(world["min"]), tuple(world["max"]), ground_z,
                         materials["concrete"], eps)
        g = sc["generator"]
        gen = gen_manhattan(
            *(_num(g[k], f"scene.generator.{k}") for k in
              ("area_x_m", "area_y_m", "block_x_m", "block_y_m", "street_w_m", "h_min_m", "h_max_m")),
            seed=seed, glass_fraction=_num(g["glass_fraction"], "scene.generator.glass_fraction"),
            concrete=materials["concrete"], glass=materials.get("glass", materials["concrete"]),
            ground_z=ground_z)
        return Scene(gen.buildings, gen.world_min, gen.world_max, ground_z, materials["concrete"], eps)
    except ConfigError:
        raise
    except (InvalidParameterError, KeyError, TypeError) as exc:
        raise ConfigError("scene", str(exc)) from None


def _build_pattern(cfg: dict) -> Pattern3D:
    a = cfg["antenna"]
    bw = _num(a["beamwidth_deg"], "antenna.beamwidth_deg", positive=True)
    floor = _num(a["sidelobe_floor_db"], "antenna.sidelobe_floor_db")
    peak = _num(a["peak_gain_dbi"], "antenna.peak_gain_dbi", allow_none=True)
    try:
        if a["azimuth_cut_file"] or a["elevation_cut_file"]:
            if not (a["azimuth_cut_file"] and a["elevation_cut_file"]):
                raise ConfigError("antenna", "give both azimuth_cut_file and elevation_cut_file")
            az = load_cut(a["azimuth_cut_file"], "azimuth")
            el = load_cut(a["elevation_cut_file"], "elevation")
            return synthesize_3d(az, el, peak if peak is not None else peak_gain_from_beamwidths(bw, bw))
        return horn_pattern(bw, floor, peak)
    except ConfigError:
        raise
    except (InvalidParameterError, OSError) as exc:
        raise ConfigError("antenna", str(exc)) from None


def build(cfg: dict) -> Scenario:
    """Validate a resolved config and construct every runtime object."""
    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed", "expected an integer")
    scene = _build_scene(cfg, seed)

    bands = {}
    for bid, spec in (cfg["bands"] or {}).items():
        where = f"bands.{bid}"
        if not isinstance(spec, dict):
            raise ConfigError(where, "expected a mapping")
        bands[str(bid)] = Band(str(bid), _num(spec.get("frequency_ghz"), f"{where}.frequency_ghz", True) * 1e9,
                               _num(spec.get("bandwidth_mhz"), f"{where}.bandwidth_mhz", True) * 1e6)
    pattern = _build_pattern(cfg)

    r = cfg["radio"]
    try:
        radio = RadioConfig(_num(r["noise_figure_db"], "radio.noise_figure_db"),
                            _num(r["coverage_threshold_db"], "radio.coverage_threshold_db"),
                            int(r["max_order"]), int(r["max_cells"]), int(r["workers"]))
    except (InvalidParameterError, TypeError, ValueError) as exc:
        raise ConfigError("radio", str(exc)) from None
    if not 0 <= radio.max_order <= 3:
        raise ConfigError("radio.max_order", "must be in [0, 3]")
    user_alt = _num(r["user_altitude_m"], "radio.user_altitude_m")
    user_res = _num(r["user_resolution_m"], "radio.user_resolution_m", positive=True)

    rl = cfg["relay"]
    mode = rl["mode"]
    if mode not in MODES:
        raise ConfigError("relay.mode", f"must be one of {MODES}")
    try:
        af = AfConfig(_num(rl["p_max_w"], "relay.p_max_w", True),
                      _num(rl["gamma_u_max_db"], "relay.gamma_u_max_db", True))
        df = DfConfig(_num(rl["df_threshold_db"], "relay.df_threshold_db"))
    except ConfigError:
        raise
    except InvalidParameterError as exc:
        raise ConfigError("relay", str(exc)) from None
    if rl["backhaul_antenna"] not in ("horn", "isotropic"):
        raise ConfigError("relay.backhaul_antenna", "must be 'horn' or 'isotropic'")
    if mode == "ob-af" and "f2" not in bands:
        raise ConfigError("bands", "ob-af needs an access band f2")

    donor = None
    uavs = []
    ids = set()
    for i, t in enumerate(cfg["transmitters"]):
        where = f"transmitters.{i}"
        if not t["id"]:
            raise ConfigError(f"{where}.id", "required")
        if t["id"] in ids:
            raise ConfigError(f"{where}.id", f"duplicate id {t['id']!r}")
        ids.add(t["id"])
        if t["band"] not in bands:
            raise ConfigError(f"{where}.band", f"unknown band {t['band']!r}")
        pos = t["position_m"]
        if not (isinstance(pos, list) and len(pos) == 3):
            raise ConfigError(f"{where}.position_m", "expected [x, y, z]")
        pos = tuple(_num(v, f"{where}.position_m") for v in pos)
        if not scene.in_bounds([pos])[0]:
            raise ConfigError(f"{where}.position_m", "outside the world bounds")
        if scene.inside_building([pos])[0]:
            raise ConfigError(f"{where}.position_m", "inside a building")
        power = _num(t["power_w"], f"{where}.power_w", positive=True)
        try:
            tx = Transmitter(t["id"], pos, t["role"], bands[t["band"]], watts_to_dbm(power),
                             _num(t["max_power_w"], f"{where}.max_power_w", True), pattern,
                             Orientation(_num(t["azimuth_deg"], f"{where}.azimuth_deg"),
                                         _num(t["downtilt_deg"], f"{where}.downtilt_deg")),
                             t["relay_mode"])
        except ConfigError:
            raise
        except InvalidParameterError as exc:
            raise ConfigError(where, str(exc)) from None
        if tx.role == "donor":
            if donor is not None:
                raise ConfigError(where, "only one donor is supported")
            donor = tx
        else:
            uavs.append(tx)
    if not cfg["transmitters"]:
        raise ConfigError("transmitters", "at least one transmitter (the donor) is required")
    if donor is None:
        raise ConfigError("transmitters", "no transmitter has role 'donor'")

    p = cfg["placement"]
    n_uavs = p["n_uavs"]
    if isinstance(n_uavs, bool) or not isinstance(n_uavs, int) or n_uavs < 0:
        raise ConfigError("placement.n_uavs", "expected an integer >= 0")
    alts = p["altitudes_m"]
    if not isinstance(alts, list) or not alts:
        raise ConfigError("placement.altitudes_m", "expected a non-empty list")
    for a in alts:
        _num(a, "placement.altitudes_m", positive=True)
    _num(p["resolution_m"], "placement.resolution_m", positive=True)
    try:
        tmpl = UavTemplate(pattern, Orientation(_num(p["uav_azimuth_deg"], "placement.uav_azimuth_deg"),
                                                _num(p["uav_downtilt_deg"], "placement.uav_downtilt_deg")),
                           _num(p["uav_max_power_w"], "placement.uav_max_power_w", True))
    except ConfigError:
        raise
    except InvalidParameterError as exc:
        raise ConfigError("placement", str(exc)) from None
    backhaul_pattern = pattern if rl["backhaul_antenna"] == "horn" else None
    pcfg = PlacementConfig(tmpl, bands.get("f2") if mode == "ob-af" else None, af, df, radio,
                           backhaul_pattern, user_alt, user_res)
    for u in uavs:
        if u.relay_mode != ("af" if mode == "ob-af" else "df"):
            raise ConfigError(f"transmitters.{u.id}", f"relay_mode {u.relay_mode!r} does not match {mode}")
    return Scenario(cfg, scene, bands, pattern, donor, uavs, radio, mode, af, df, pcfg)


def load(path: str | Path, overrides: Optional[list[tuple[str, Any]]] = None) -> Scenario:
    return build(resolve(load_raw(path), overrides))
