"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

The lines are printed as the tests run (visible with ``-s``) and repeated in
the terminal summary by ``conftest.py``.
"""

import filecmp
import math
import random
import time

import numpy as np
import pytest

from oracles import exhaustive_single, oracle_paths, random_outdoor_point, random_placement_case, random_scene
from uaviab import cli, config
from uaviab.analysis import SinrCdf, cdf_from_map, cell_center_delta, coverage_gain, gap_percentile
from uaviab.errors import InfeasibleError
from uaviab.placement import backhaul_grid, evaluate_placement, greedy_place
from uaviab.radio import coverage_fraction, coverage_map, watts_to_dbm
from uaviab.raytrace import enumerate_paths, fspl, path_set_key
from uaviab.relay import AfConfig, af_tx_power, apply_relaying

RESULTS: list[str] = []

TABLE_I = [(16.95, 32.28), (17.42, 32.41), (17.45, 32.43), (18.56, 32.67), (19.98, 32.99),
           (20.0, 33.01), (20.24, 33.05), (20.27, 33.07), (20.37, 33.10), (20.74, 33.16),
           (20.81, 33.18), (23.47, 33.69), (25.17, 34.00), (25.21, 34.01)]
TABLE_I_DEVIATING = [(34.22, 34.42), (34.32, 34.43)]


def report(n: int, ok: bool, text: str) -> None:
    line = f"criterion {n} [{'PASS' if ok else 'FAIL'}] {text}"
    RESULTS.append(line)
    print(line)


def placed(name: str):
    """Greedy 2-UAV placement in a shipped reference scenario, plus the donor-only map."""
    sc = config.load(f"builtin:{name}")
    p = sc.config["placement"]
    t0 = time.perf_counter()
    grid = backhaul_grid(sc.scene, sc.donor, p["altitudes_m"], p["resolution_m"], sc.radio,
                         sc.placement.backhaul_pattern)
    result = greedy_place(sc.scene, sc.donor, p["n_uavs"], sc.mode, grid, sc.placement)
    base = evaluate_placement(sc.scene, sc.donor, [], sc.mode, sc.placement).ground_map
    return sc, result, base, time.perf_counter() - t0


@pytest.fixture(scope="module")
def af_run():
    return placed("af_reference")


@pytest.fixture(scope="module")
def df_run():
    return placed("df_reference")


def test_criterion_1_power_table():
    t0 = time.perf_counter()
    af = AfConfig(5.0, 50.0)
    errs = [abs(watts_to_dbm(af_tx_power(g, af)) - p) for g, p in TABLE_I]
    dev = [abs(watts_to_dbm(af_tx_power(g, af)) - p) for g, p in TABLE_I_DEVIATING]
    dt = time.perf_counter() - t0
    ok = max(errs) <= 0.02 and min(dev) > 0.5 and dt < 1.0
    report(1, ok, f"AF power mapping: {sum(e <= 0.02 for e in errs)}/14 rows within 0.02 dBm "
                  f"(max error {max(errs):.4f}); last two rows deviate by "
                  f"{dev[0]:.2f} and {dev[1]:.2f} dBm; {dt:.3f} s")
    assert ok


def test_criterion_2_image_method_oracle():
    t0 = time.perf_counter()
    rng = random.Random(20240601)
    pairs = mismatches = n_paths = 0
    for _ in range(100):
        sc = random_scene(rng, rng.randint(1, 4))
        for _ in range(10):
            a = random_outdoor_point(rng, sc)
            b = random_outdoor_point(rng, sc)
            order = rng.choice([0, 1, 2, 2])
            got = path_set_key(enumerate_paths(sc, a, b, order))
            want = oracle_paths(sc, a, b, order)
            pairs += 1
            n_paths += len(want)
            same = len(got) == len(want) and all(
                go == wo and abs(gl - wl) <= 1e-6 for (go, gl), (wo, wl) in zip(got, want))
            mismatches += not same
    dt = time.perf_counter() - t0
    ok = pairs >= 1000 and mismatches == 0 and dt < 60.0
    report(2, ok, f"image method vs exhaustive mirroring: {pairs - mismatches}/{pairs} pairs identical "
                  f"({n_paths} paths, lengths within 1e-6 m); {dt:.1f} s")
    assert ok


def test_criterion_3_greedy_equals_exhaustive():
    t0 = time.perf_counter()
    agree = cases = 0
    max_cands = 0
    for seed in range(20):
        scene, donor, mode, cfg, alt, res = random_placement_case(seed)
        grid = backhaul_grid(scene, donor, alt, res, cfg.radio, cfg.backhaul_pattern)
        max_cands = max(max_cands, len(grid))
        idx, cov, base = exhaustive_single(scene, donor, mode, grid, cfg)
        try:
            r = greedy_place(scene, donor, 1, mode, grid, cfg)
            got = (r.candidate_index[0], r.objective) if r.chosen else (None, None)
        except InfeasibleError:
            got = (None, None)
        cases += 1
        agree += got == (idx, cov)
    dt = time.perf_counter() - t0
    ok = cases >= 20 and agree == cases and max_cands <= 40 and dt < 300.0
    report(3, ok, f"1-UAV greedy vs exhaustive: {agree}/{cases} scenarios agree "
                  f"(<= {max_cands} candidates each); {dt:.1f} s")
    assert ok


def test_criterion_4_af_reference(af_run):
    sc, r, base, dt = af_run
    thr = sc.radio.coverage_threshold_db
    c0, c1 = cdf_from_map(base), cdf_from_map(r.ground_map)
    cov0, cov1 = coverage_fraction(base), coverage_fraction(r.ground_map)
    gp0, gp1 = gap_percentile(c0, thr), gap_percentile(c1, thr)
    gain = coverage_gain(c0, c1, thr)
    ref = sc.config["reference"]["coverage_gain"]
    ok = len(r.chosen) == 2 and cov1 > cov0 and gp1 < gp0 and dt < 600.0
    report(4, ok, f"ob-af reference: coverage {cov0:.4f} -> {cov1:.4f}, gap percentile "
                  f"{gp0:.2f}% -> {gp1:.2f}%, gain {gain:.2f}x (reported {ref}x); UAVs at "
                  f"{[p for p, _ in r.chosen]}; {dt:.1f} s")
    assert ok


def test_criterion_5_df_reference(df_run):
    sc, r, base, dt = df_run
    cov0, cov1 = coverage_fraction(base), coverage_fraction(r.ground_map)
    delta = cell_center_delta(base, r.ground_map, sc.donor.band.id)
    gates = [g is not None and g >= sc.df.threshold_db for g in r.backhaul]
    ok = len(r.chosen) == 2 and all(gates) and cov1 > cov0 and delta <= 0.0 and dt < 600.0
    report(5, ok, f"ib-df reference: backhaul SINR {[round(g, 2) for g in r.backhaul]} dB "
                  f"(gate {sc.df.threshold_db:g} dB), coverage {cov0:.4f} -> {cov1:.4f} "
                  f"(gain {cov1 / cov0:.2f}x, reported {sc.config['reference']['coverage_gain']}x), "
                  f"cell-center delta {delta:.3f} dB; {dt:.1f} s")
    assert ok


def test_criterion_6_invariants(af_run):
    checks = {}
    # band isolation over the entire AF reference map
    sc, r, base, _ = af_run
    p = sc.placement
    f1, f2 = sc.bands["f1"], sc.bands["f2"]
    before = coverage_map(sc.scene, [sc.donor], [f1, f2], p.user_altitude, p.user_resolution, sc.radio)
    after = r.ground_map
    checks["band isolation"] = (np.array_equal(before.sinr_db["f1"], after.sinr_db["f1"], equal_nan=True)
                                and np.array_equal(before.serving["f1"], after.serving["f1"]))

    # DF gating: a UAV below the threshold adds no power anywhere
    dsc = config.load("builtin:df_reference")
    weak = [u for u in dsc.uavs[:1]]
    weak = [type(u)(u.id, (700.0, 220.0, 200.0), u.role, u.band, u.tx_power_dbm, u.max_power_w, u.pattern,
                    u.orientation, u.relay_mode) for u in weak]
    relayed, rep = apply_relaying(dsc.donor, weak, "ib-df", dsc.scene, df=dsc.df, radio=dsc.radio,
                                  backhaul_pattern=dsc.placement.backhaul_pattern)
    g = rep[0].gamma_bh_db
    dp = dsc.placement
    m0 = coverage_map(dsc.scene, [dsc.donor], dsc.donor.band, dp.user_altitude, dp.user_resolution, dsc.radio)
    m1 = coverage_map(dsc.scene, [dsc.donor] + relayed, dsc.donor.band, dp.user_altitude, dp.user_resolution,
                      dsc.radio)
    checks["DF gating"] = ((g is None or g < 15.0) and not relayed[0].active
                           and bool(np.all(np.isneginf(m1.rx_power_dbm[weak[0].id][m1.outdoor])))
                           and np.array_equal(m0.sinr_db["f1"], m1.sinr_db["f1"], equal_nan=True))

    # FSPL monotone, and doubling distance adds 20 log10(2) = 6.0206 dB
    d = np.logspace(-1, 5, 2000)
    ok_fspl = True
    for f in (30e9, 60e9):
        loss = fspl(d, f)
        ok_fspl &= bool(np.all(np.diff(loss) > 0))
        ok_fspl &= bool(np.max(np.abs(fspl(2 * d, f) - loss - 20 * math.log10(2))) < 1e-9)
        ok_fspl &= bool(np.max(np.abs(fspl(2 * d, f) - loss - 6.0206)) < 1e-4)
    checks["FSPL"] = ok_fspl

    # every bounce in the reference scene costs a strictly positive loss
    rng = random.Random(5)
    bounces, positive = 0, True
    for _ in range(30):
        a = (rng.uniform(-700, 700), rng.choice([0.0, 140.0, -140.0]), rng.uniform(1.5, 60.0))
        b = (rng.uniform(-700, 700), rng.choice([0.0, 140.0, -140.0]), 1.5)
        if sc.scene.inside_building([a, b]).any():
            continue
        for path in enumerate_paths(sc.scene, a, b, 2):
            for _, mat in path.reflections:
                bounces += 1
                positive &= mat.loss_db(f1.center_frequency) > 0 and mat.loss_db(f2.center_frequency) > 0
    checks["reflection loss"] = positive and bounces > 0

    # CDF identities on the reference maps
    c = cdf_from_map(r.ground_map)
    thr = np.linspace(-40, 60, 201)
    gp = [gap_percentile(c, t) for t in thr]
    checks["CDF identities"] = (coverage_gain(c, c, 0.0) == 1.0 and all(x <= y for x, y in zip(gp, gp[1:]))
                                and coverage_gain(SinrCdf(c.samples), c, 0.0) == 1.0)

    ok = all(checks.values())
    report(6, ok, "invariants: " + ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items())
           + f" ({bounces} bounces checked)")
    assert ok


def test_criterion_7_determinism(tmp_path):
    t0 = time.perf_counter()
    same = {}
    for name in ("af_reference", "df_reference"):
        outs = []
        for k, workers in enumerate((1, 1, 2)):
            out = tmp_path / f"{name}_{k}"
            assert cli.run("trace", f"builtin:{name}", [f"radio.workers={workers}"], out) == 0
            outs.append(out / "coverage.csv")
        same[name] = all(filecmp.cmp(outs[0], o, shallow=False) for o in outs[1:])
    dt = time.perf_counter() - t0
    ok = all(same.values())
    report(7, ok, "byte-identical coverage CSVs over two runs and workers=1 vs 2: "
           + ", ".join(f"{k} {'identical' if v else 'DIFFER'}" for k, v in same.items()) + f"; {dt:.1f} s")
    assert ok
