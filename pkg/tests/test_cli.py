import filecmp
import math

import pytest
import yaml

from uaviab import cli, config
from uaviab.config import ConfigError

SMALL = """
name: small
seed: 3
scene:
  generator: {area_x_m: 300, area_y_m: 200, block_x_m: 60, block_y_m: 50, street_w_m: 20,
              h_min_m: 10, h_max_m: 30}
transmitters:
  - {id: donor, role: donor, position_m: [0, 0, 25], band: f1, power_w: 10, downtilt_deg: 2}
  - {id: uav1, role: uav, position_m: [100, 0, 80], band: f2, max_power_w: 5, downtilt_deg: 90}
radio: {user_resolution_m: 10}
relay: {mode: ob-af, gamma_u_max_db: 50}
placement: {n_uavs: 1, altitudes_m: [80], resolution_m: 50}
"""


@pytest.fixture
def scenario(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(SMALL)
    return p


def test_resolve_fills_every_default(scenario):
    cfg = config.resolve(config.load_raw(scenario))
    assert cfg["radio"]["noise_figure_db"] == 7.0
    assert cfg["bands"]["f2"]["frequency_ghz"] == 60.0
    uav = cfg["transmitters"][1]
    assert uav["relay_mode"] == "af" and uav["power_w"] == 5 and uav["azimuth_deg"] == 0.0
    assert cfg["transmitters"][0]["max_power_w"] == 10


def test_builtin_scenarios_hold_reference_constants():
    af = config.load("builtin:af_reference")
    assert af.donor.position == (-700.0, 0.0, 25.0)
    assert af.donor.tx_power_dbm == pytest.approx(40.0)
    assert af.bands["f1"].center_frequency == 30e9 and af.bands["f2"].center_frequency == 60e9
    assert [u.position for u in af.uavs] == [(-50.0, 150.0, 200.0), (-50.0, -150.0, 200.0)]
    assert af.af.p_max_w == 5.0 and af.mode == "ob-af"
    assert af.config["placement"]["resolution_m"] == 200 and af.placement.user_resolution == 10
    df = config.load("builtin:df_reference")
    assert df.donor.position == (0.0, 0.0, 25.0) and df.df.threshold_db == 15.0
    assert [u.position[:2] for u in df.uavs] == [(-20.0, 200.0), (20.0, -200.0)]


def test_overrides_win_and_are_recorded(scenario):
    sc = config.load(scenario, [config.parse_override("radio.workers=2"),
                                config.parse_override("transmitters.0.power_w=5")])
    assert sc.radio.workers == 2
    assert sc.donor.tx_power_dbm == pytest.approx(36.9897, abs=1e-4)
    manifest = yaml.safe_load(sc.manifest_text())
    assert manifest["radio"]["workers"] == 2 and manifest["transmitters"][0]["power_w"] == 5


@pytest.mark.parametrize("override,where", [
    ("radio.bogus=1", "radio.bogus"),
    ("transmitters.0.band=f9", "transmitters.0.band"),
    ("transmitters.0.position_m=[0, 0]", "transmitters.0.position_m"),
    ("transmitters.0.position_m=[0, 0, 5000]", "transmitters.0.position_m"),
    ("relay.mode=xx", "relay.mode"),
    ("radio.user_resolution_m=-1", "radio.user_resolution_m"),
    ("transmitters=[]", "transmitters"),
    ("transmitters.5.id=x", "transmitters.5"),
    ("seed=1.5", "seed"),
])
def test_validation_errors_name_the_field(scenario, override, where):
    with pytest.raises(ConfigError) as e:
        config.load(scenario, [config.parse_override(override)])
    assert e.value.where == where


def test_indoor_transmitter_rejected(scenario):
    with pytest.raises(ConfigError, match="inside a building"):
        config.load(scenario, [config.parse_override("transmitters.1.position_m=[60, 45, 5]")])


def test_yaml_syntax_error_has_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("name: x\nradio: {a: 1\n")
    with pytest.raises(ConfigError, match=r"bad.yaml:\d+:\d+"):
        config.load(p)


def test_trace_without_transmitters_exits_1(scenario, tmp_path, capsys):
    assert cli.main(["trace", "--scenario", str(scenario), "--set", "transmitters=[]",
                     "--out", str(tmp_path / "o")]) == 1
    assert "transmitters" in capsys.readouterr().err


def test_runtime_error_exits_2(scenario, tmp_path):
    # a cell budget below the grid size is a runtime resource error
    assert cli.run("trace", str(scenario), ["radio.max_cells=10"], tmp_path / "o") == 2


def test_trace_outputs_and_determinism(scenario, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.run("trace", str(scenario), [], a) == 0
    assert cli.run("trace", str(scenario), [], b) == 0
    for name in ("coverage.csv", "coverage_f1.pgm", "coverage_f2.pgm", "coverage_union.pgm",
                 "summary.txt", "manifest.yaml"):
        assert (a / name).exists()
        assert filecmp.cmp(a / name, b / name, shallow=False)
    summary = (a / "summary.txt").read_text()
    assert "coverage union:" in summary and "backhaul uav1:" in summary


def test_manifest_round_trip(scenario, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.run("trace", str(scenario), ["radio.coverage_threshold_db=3"], a) == 0
    assert cli.run("trace", str(a / "manifest.yaml"), [], b) == 0
    assert filecmp.cmp(a / "coverage.csv", b / "coverage.csv", shallow=False)
    assert (a / "manifest.yaml").read_text() == (b / "manifest.yaml").read_text()


def test_power_table(scenario, tmp_path):
    assert cli.run("power-table", str(scenario), [], tmp_path) == 0
    rows = (tmp_path / "power_table.csv").read_text().splitlines()
    assert rows[0] == "backhaul_sinr_db,tx_power_dbm"
    vals = [tuple(map(float, r.split(","))) for r in rows[1:]]
    assert vals == sorted(vals)
    for g, p in vals:
        want = 10 * math.log10(1000 * min(5.0, 5.0 * g / 50.0))
        assert p == pytest.approx(want, abs=1e-5)


def test_cdf_and_compare(scenario, tmp_path):
    assert cli.run("cdf", str(scenario), [], tmp_path / "c") == 0
    assert (tmp_path / "c" / "cdf_baseline.csv").read_text().startswith("sinr_db,cumulative_fraction\ngap,")
    assert (tmp_path / "c" / "cdf_relayed.csv").exists()
    assert cli.run("compare", str(scenario), [], tmp_path / "d", baseline_scenario=str(scenario)) == 0
    report = (tmp_path / "d" / "compare.txt").read_text()
    assert "coverage gain: 1.000000" in report
    assert "cell-center delta (f1): 0.000000 dB" in report


def test_place(scenario, tmp_path):
    assert cli.run("place", str(scenario), [], tmp_path) == 0
    text = (tmp_path / "placement.txt").read_text()
    assert "uav1: position" in text
    assert (tmp_path / "coverage_placed.csv").exists()
