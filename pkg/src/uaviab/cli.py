"""Command-line batch front end.

    uaviab <command> --scenario <path|builtin:name> [--set key=value]... --out <dir>

Exit status: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import analysis, config
from .errors import InvalidParameterError
from .placement import backhaul_grid, greedy_place, placement_report
from .radio import CoverageMap, coverage_fraction, coverage_map, write_csv, write_pgm
from .relay import BackhaulReport, apply_relaying, build_power_table

COMMANDS = ("trace", "place", "power-table", "cdf", "compare")


@dataclass
class GroundRun:
    baseline: CoverageMap  # donor only
    relayed: CoverageMap  # donor plus the scenario's UAVs after relaying
    backhaul: list[BackhaulReport]


def ground_run(sc: config.Scenario) -> GroundRun:
    """Donor-only and relayed user-level maps for the scenario's listed UAVs."""
    p = sc.placement
    base = coverage_map(sc.scene, [sc.donor], sc.donor.band, p.user_altitude, p.user_resolution, sc.radio)
    if not sc.uavs:
        return GroundRun(base, base, [])
    relayed, reports = apply_relaying(sc.donor, sc.uavs, sc.mode, sc.scene, sc.af, sc.df,
                                      sc.access_band if sc.mode == "ob-af" else None, sc.radio,
                                      backhaul_pattern=p.backhaul_pattern)
    bands = [sc.donor.band] + ([sc.access_band] if sc.mode == "ob-af" else [])
    after = coverage_map(sc.scene, [sc.donor] + relayed, bands, p.user_altitude, p.user_resolution, sc.radio)
    return GroundRun(base, after, reports)


def _write_maps(sc: config.Scenario, cmap: CoverageMap, out: Path, stem: str) -> None:
    write_csv(cmap, out / f"{stem}.csv")
    o = sc.config["output"]
    for b in sorted(cmap.sinr_db) + ["union"]:
        write_pgm(cmap, out / f"{stem}_{b}.pgm", b, o["pgm_min_db"], o["pgm_max_db"])


def _backhaul_lines(reports: Sequence[BackhaulReport]) -> list[str]:
    return [f"backhaul {r.uav_id}: " + ("gap" if r.gamma_bh_db is None else f"{r.gamma_bh_db:.4f} dB")
            for r in reports]


def cmd_trace(sc: config.Scenario, out: Path) -> None:
    run = ground_run(sc)
    _write_maps(sc, run.relayed, out, "coverage")
    thr = sc.radio.coverage_threshold_db
    lines = [f"scenario: {sc.config['name']}", f"coverage threshold: {thr:g} dB"]
    for b in sorted(run.relayed.sinr_db):
        lines.append(f"coverage {b}: {coverage_fraction(run.relayed, b):.6f}")
    lines.append(f"coverage union: {coverage_fraction(run.relayed):.6f}")
    lines += _backhaul_lines(run.backhaul)
    (out / "summary.txt").write_text("\n".join(lines) + "\n")


def cmd_place(sc: config.Scenario, out: Path) -> None:
    p = sc.config["placement"]
    grid = backhaul_grid(sc.scene, sc.donor, p["altitudes_m"], p["resolution_m"], sc.radio,
                         sc.placement.backhaul_pattern)
    result = greedy_place(sc.scene, sc.donor, p["n_uavs"], sc.mode, grid, sc.placement)
    (out / "placement.txt").write_text(
        placement_report(result, sc.mode, sc.radio.coverage_threshold_db))
    _write_maps(sc, result.ground_map, out, "coverage_placed")


def backhaul_map(sc: config.Scenario) -> CoverageMap:
    """Donor-band SINR at the first candidate altitude, as seen by the UAV backhaul antenna."""
    p = sc.config["placement"]
    return coverage_map(sc.scene, [sc.donor], sc.donor.band, p["altitudes_m"][0], p["resolution_m"],
                        sc.radio, rx_pattern=sc.placement.backhaul_pattern, rx_aim=sc.donor.position)


def cmd_power_table(sc: config.Scenario, out: Path) -> None:
    bmap = backhaul_map(sc)
    write_csv(bmap, out / "backhaul.csv")
    rows = build_power_table(bmap, sc.af, sc.donor.band.id)
    lines = ["backhaul_sinr_db,tx_power_dbm"] + [f"{g:.6f},{p:.6f}" for g, p in rows]
    (out / "power_table.csv").write_text("\n".join(lines) + "\n")


def cmd_cdf(sc: config.Scenario, out: Path) -> None:
    run = ground_run(sc)
    analysis.write_cdf_csv(analysis.cdf_from_map(run.baseline), out / "cdf_baseline.csv")
    if sc.uavs:
        analysis.write_cdf_csv(analysis.cdf_from_map(run.relayed), out / "cdf_relayed.csv")


def compare_report(before: CoverageMap, after: CoverageMap, donor_band: str, threshold_db: float,
                   reference_gain: Optional[float] = None) -> str:
    c0, c1 = analysis.cdf_from_map(before), analysis.cdf_from_map(after)
    try:
        gain = f"{analysis.coverage_gain(c0, c1, threshold_db):.6f}"
    except ZeroDivisionError:
        gain = "undefined"
    try:
        delta = f"{analysis.cell_center_delta(before, after, donor_band):.6f} dB"
    except ValueError:
        delta = "undefined"
    lines = [f"coverage threshold: {threshold_db:g} dB",
             f"coverage before: {1.0 - c0.below(threshold_db):.6f}",
             f"coverage after: {1.0 - c1.below(threshold_db):.6f}",
             f"coverage gain: {gain}",
             f"gap percentile before: {analysis.gap_percentile(c0, threshold_db):.4f}%",
             f"gap percentile after: {analysis.gap_percentile(c1, threshold_db):.4f}%",
             f"cell-center delta ({donor_band}): {delta}"]
    if reference_gain is not None:
        lines.append(f"reference gain: {reference_gain:g}")
    return "\n".join(lines) + "\n"


def cmd_compare(sc: config.Scenario, out: Path, baseline: Optional[config.Scenario]) -> None:
    run_after = ground_run(sc)
    after = run_after.relayed
    before = ground_run(baseline).relayed if baseline is not None else run_after.baseline
    if not before.same_grid(after):
        raise InvalidParameterError("scenarios produce maps on different grids")
    if baseline is not None:
        (out / "baseline_manifest.yaml").write_text(baseline.manifest_text())
    report = compare_report(before, after, sc.donor.band.id, sc.radio.coverage_threshold_db,
                            sc.config["reference"].get("coverage_gain"))
    (out / "compare.txt").write_text(report)


def run(command: str, scenario: str, overrides: Sequence[str] = (), out: str | Path = ".",
        baseline_scenario: Optional[str] = None) -> int:
    """Run one command; returns the process exit status."""
    try:
        if command not in COMMANDS:
            raise config.ConfigError("command", f"must be one of {COMMANDS}")
        sc = config.load(scenario, [config.parse_override(o) for o in overrides])
        base = config.load(baseline_scenario) if baseline_scenario else None
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.yaml").write_text(sc.manifest_text())
        if command == "trace":
            cmd_trace(sc, out)
        elif command == "place":
            cmd_place(sc, out)
        elif command == "power-table":
            cmd_power_table(sc, out)
        elif command == "cdf":
            cmd_cdf(sc, out)
        else:
            cmd_compare(sc, out, base)
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="uaviab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--scenario", required=True, help="YAML file, or builtin:af_reference / builtin:df_reference")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a dotted config path, e.g. radio.workers=2")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--baseline-scenario", help="compare: scenario for the 'before' side")
    args = ap.parse_args(argv)
    return run(args.command, args.scenario, args.overrides, args.out, args.baseline_scenario)


if __name__ == "__main__":
    sys.exit(main())
