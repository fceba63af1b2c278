import json

import numpy as np
import pytest

from photogemm.config import SystemConfig, dump_config, load_config, parse_config_text
from photogemm.errors import InvalidConfig, InvalidValue
from photogemm.matrix_io import MAGIC, read_matrix, write_matrix
from photogemm.photonic import CALIBRATED_SIGMA
from photogemm.report import body, dumps, make_report


def test_defaults():
    cfg = SystemConfig()
    assert cfg.num_ppus == 100 and cfg.converter_rate_sps == 97e9
    assert (cfg.dram_bw_bytes_s, cfg.global_sram_bw_bytes_s, cfg.local_sram_bw_bytes_s) == (1.5e12, 6e12, 8e12)
    assert cfg.noise.sigma == CALIBRATED_SIGMA
    assert cfg.slice_config().num_slices == 2
    assert cfg.combined_exponent_range() == (-64, 62)


def test_parse_and_round_trip(tmp_path):
    text = """
    # a comment
    num_ppus = 50
    mantissa_bits = 12    # trailing comment
    overlap_load_compute = no
    combined_exponent_max = 8
    noise.mode = mzm-transfer
    noise.sigma_by_width = 4:1.5, 5:2
    slice.slice_width = 4
    """
    cfg = parse_config_text(text)
    assert cfg.num_ppus == 50 and cfg.mantissa_bits == 12 and not cfg.overlap_load_compute
    assert cfg.noise.mode == "mzm-transfer" and cfg.noise.sigma_by_width == {4: 1.5, 5: 2.0}
    assert cfg.slice_config().num_slices == 3
    assert cfg.combined_exponent_range()[1] == 8
    path = tmp_path / "c.cfg"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
    assert load_config(None) == SystemConfig()


@pytest.mark.parametrize(
    "text",
    [
        "num_ppus = 0",
        "no_such_key = 1",
        "noise.bogus = 1",
        "thing.sigma = 1",
        "num_ppus",
        "num_ppus = many",
        "overlap_load_compute = maybe",
        "dataflow = sideways",
        "slice.slice_width = 9",
        "mantissa_bits = 30\nslice.num_slices = 2",
        "noise.sigma = -1",
        "exponent_bits = 0",
    ],
)
def test_invalid_configs(text):
    with pytest.raises(InvalidConfig):
        parse_config_text(text)


def test_replace_with_dotted_keys():
    cfg = SystemConfig().replace(**{"noise.sigma": 0.0, "tile_size": 4})
    assert cfg.noise.sigma == 0.0 and cfg.tile_size == 4


@pytest.mark.parametrize("name", ["m.csv", "m.bin", "m.lmhp"])
def test_matrix_round_trip(tmp_path, name):
    m = np.random.default_rng(0).normal(size=(3, 5))
    m[0, 0] = 1e-300
    write_matrix(tmp_path / name, m)
    np.testing.assert_array_equal(read_matrix(tmp_path / name), m)
    if name.endswith(".csv"):
        assert not (tmp_path / name).read_bytes().startswith(MAGIC)


def test_binary_sniffed_regardless_of_suffix(tmp_path):
    m = np.arange(6.0).reshape(2, 3)
    write_matrix(tmp_path / "x.dat", m, binary=True)
    np.testing.assert_array_equal(read_matrix(tmp_path / "x.dat"), m)


@pytest.mark.parametrize(
    "content",
    [b"1,2\n3\n", b"", b"1,abc\n", MAGIC + b"\x01", b"1,nan\n", b"1,inf\n"],
)
def test_bad_matrix_files(tmp_path, content):
    p = tmp_path / "bad.csv"
    p.write_bytes(content)
    with pytest.raises(InvalidValue):
        read_matrix(p)


def test_report_body_excludes_timing():
    doc = make_report("x", SystemConfig(), 3, {"a": np.int64(1)}, {"v": np.arange(3)}, wall_clock_s=1.5)
    assert doc["meta"]["wall_clock_s"] == 1.5
    assert "meta" not in body(doc)
    parsed = json.loads(dumps(doc))
    assert parsed["results"]["v"] == [0, 1, 2] and parsed["config"]["noise.seed"] == 0
    assert "wall_clock" not in dumps(doc, "csv")
