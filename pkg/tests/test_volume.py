import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bowlerhat3d.errors import (InvalidDimsError, MissingRawError, RawSizeError,
                                UnknownDtypeError)
from bowlerhat3d.volume import Volume, load_volume, normalize, save_volume


def write_pair(tmp_path, header, payload, name="v"):
    header = dict(header, raw=f"{name}.raw")
    (tmp_path / f"{name}.json").write_text(json.dumps(header))
    (tmp_path / f"{name}.raw").write_bytes(payload)
    return tmp_path / f"{name}.json"


def test_load_u8_exact(tmp_path):
    p = write_pair(tmp_path, {"dims": [2, 1, 1], "dtype": "u8"}, bytes([0, 255]))
    vol = load_volume(p)
    assert vol.data.dtype == np.float32
    assert vol.data[:, 0, 0].tolist() == [0.0, 255.0]
    assert vol.provenance == str(p)


def test_load_u16_zeros(tmp_path):
    p = write_pair(tmp_path, {"dims": [2, 2, 2], "dtype": "u16"}, bytes(16))
    assert not load_volume(p).data.any()


def test_x_fastest_layout(tmp_path):
    p = write_pair(tmp_path, {"dims": [2, 3, 1], "dtype": "u8"}, bytes(range(6)))
    vol = load_volume(p)
    assert vol.data[1, 0, 0] == 1 and vol.data[0, 1, 0] == 2 and vol.data[1, 2, 0] == 5
    assert vol.index(1, 2, 0) == 5


def test_size_mismatch(tmp_path):
    p = write_pair(tmp_path, {"dims": [3, 3, 3], "dtype": "u8"}, bytes(26))
    with pytest.raises(RawSizeError, match="27"):
        load_volume(p)


def test_missing_raw(tmp_path):
    p = tmp_path / "h.json"
    p.write_text(json.dumps({"dims": [1, 1, 1], "dtype": "u8", "raw": "nope.raw"}))
    with pytest.raises(MissingRawError):
        load_volume(p)


@pytest.mark.parametrize("header, err", [
    ({"dims": [1, 1, 1], "dtype": "i8"}, UnknownDtypeError),
    ({"dims": [0, 1, 1], "dtype": "u8"}, InvalidDimsError),
    ({"dims": [2, 2], "dtype": "u8"}, InvalidDimsError),
])
def test_bad_headers(tmp_path, header, err):
    p = write_pair(tmp_path, header, b"\0")
    with pytest.raises(err):
        load_volume(p)


def test_f32_roundtrip_bits(tmp_path):
    data = np.random.default_rng(0).normal(size=(4, 5, 6)).astype(np.float32)
    save_volume(Volume(data), tmp_path / "a.json")
    back = load_volume(tmp_path / "a.json").data
    assert back.tobytes() == data.tobytes()


@pytest.mark.parametrize("value, stored", [(255.7, 255), (-0.4, 0), (2.5, 3), (2.49, 2)])
def test_u8_clamp_and_round(tmp_path, value, stored):
    save_volume(Volume(np.full((1, 1, 1), value)), tmp_path / "c.json", "u8")
    assert (tmp_path / "c.raw").read_bytes() == bytes([stored])


def test_u16_clamp(tmp_path):
    save_volume(Volume(np.array([[[70000.0]], [[-3.0]]])), tmp_path / "c.json", "u16")
    assert load_volume(tmp_path / "c.json").data.ravel().tolist() == [65535.0, 0.0]


def test_volume_is_immutable():
    vol = Volume(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        vol.data[0, 0, 0] = 1


def test_volume_rejects_nonfinite():
    with pytest.raises(ValueError):
        Volume(np.full((1, 1, 1), np.nan))


def test_from_flat_roundtrip():
    vals = np.arange(24, dtype=np.float32)
    vol = Volume.from_flat((2, 3, 4), vals)
    assert np.array_equal(vol.flat(), vals)
    with pytest.raises(InvalidDimsError):
        Volume.from_flat((2, 3, 3), vals)


@pytest.mark.parametrize("inp, out", [([2, 4, 6], [0, 0.5, 1]), ([-1, 0, 3], [0, 0.25, 1]),
                                      ([7, 7, 7], [0, 0, 0])])
def test_normalize_examples(inp, out):
    got = normalize(np.array(inp, dtype=np.float32).reshape(3, 1, 1)).ravel()
    assert got.tolist() == out


@settings(max_examples=50, deadline=None)
@given(arrays(np.float32, (3, 4, 2), elements=st.floats(-1e4, 1e4, width=32)))
def test_normalize_range(a):
    n = normalize(a)
    assert n.min() >= 0 and n.max() <= 1
    if a.max() > a.min():
        assert n.min() == 0 and n.max() == 1
