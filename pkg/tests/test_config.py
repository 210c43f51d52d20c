import pytest

from bea_mcn.config import ConfigError, build_config, RunManifest, config_from_snapshot, config_snapshot, load_config, read_config_text


def test_reads_table_keys(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# defaults\ncell_diameter_m = 500\nring_width_m=500/6\nnode_count=40  # fewer\nseed=3\n")
    cfg = load_config(p, ["realizations=5"])
    assert cfg.node_count == 40 and cfg.seed == 3 and cfg.realizations == 5
    assert cfg.ring_widths_m == pytest.approx((500 / 6,) * 3)


def test_three_widths():
    cfg = load_config(None, ["ring_width_m=114.58333333333333,83.33333333333333,52.083333333333336"])
    assert cfg.ring_widths_m[0] == pytest.approx(114.5833, abs=1e-4)


def test_rounded_widths_accepted():
    cfg = load_config(None, ["ring_width_m=83.3333"])
    assert sum(cfg.ring_widths_m) == pytest.approx(250, abs=1e-3)
    with pytest.raises(ConfigError):
        load_config(None, ["ring_width_m=83.3"])


@pytest.mark.parametrize("text", ["bogus=1", "node_count=1.5", "seed=x", "realizations=0", "just a line"])
def test_rejects(text):
    with pytest.raises(ConfigError):
        build_config(read_config_text(text))


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/file.cfg")


def test_snapshot_round_trip(tmp_path):
    cfg = load_config(None, ["seed=9", "node_count=12"])
    assert config_from_snapshot(config_snapshot(cfg)) == cfg
    man = RunManifest(config_snapshot(cfg), 9, "0", "a", "b", {"axis": None, "values": []}, {"x.csv": "00"})
    man.write(tmp_path / "m.json")
    assert RunManifest.read(tmp_path / "m.json") == man
