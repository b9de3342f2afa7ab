import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from antidazzle.errors import DataIOError
from antidazzle.io import decode_adpf, encode_adpf, encode_png16, read_png, read_radiance, write_adpf, read_adpf


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 10**6))
def test_adpf_roundtrip(h, w, seed):
    vals = np.random.default_rng(seed).standard_normal((h, w)).astype(np.float32)
    out, pitch, wl = decode_adpf(encode_adpf(vals, 5.4e-6, 633e-9))
    np.testing.assert_array_equal(out, vals)
    assert (pitch, wl) == (5.4e-6, 633e-9)


def test_adpf_header_layout():
    blob = encode_adpf(np.zeros((2, 3)), 1.0, 2.0)
    assert blob[:4] == b"ADPF"
    assert struct.unpack_from("<BBII", blob, 4) == (1, 1, 3, 2)
    assert len(blob) == 30 + 4 * 6


@pytest.mark.parametrize("mutate", [lambda b: b"XDPF" + b[4:], lambda b: b[:4] + b"\x02" + b[5:], lambda b: b[:-1], lambda b: b[:10]])
def test_adpf_rejects_corruption(mutate):
    with pytest.raises(DataIOError):
        decode_adpf(mutate(encode_adpf(np.ones((2, 2)), 1.0, 1.0)))


def test_png16_roundtrip(tmp_path):
    arr = np.random.default_rng(1).integers(0, 65536, (7, 9)).astype(np.uint16)
    path = tmp_path / "a.png"
    path.write_bytes(encode_png16(arr))
    back = read_png(path)
    assert back.dtype == np.uint16
    np.testing.assert_array_equal(back, arr)
    np.testing.assert_allclose(read_radiance(path), arr / 65535.0)


def test_png16_is_deterministic():
    arr = np.arange(12, dtype=np.uint16).reshape(3, 4)
    assert encode_png16(arr) == encode_png16(arr.copy())


def test_missing_files(tmp_path):
    with pytest.raises(DataIOError):
        read_png(tmp_path / "nope.png")
    with pytest.raises(DataIOError):
        read_adpf(tmp_path / "nope.adpf")


def test_write_adpf(tmp_path):
    write_adpf(tmp_path / "x.adpf", np.eye(3), 1e-6, 5e-7)
    vals, _, _ = read_adpf(tmp_path / "x.adpf")
    np.testing.assert_array_equal(vals, np.eye(3, dtype=np.float32))
