"""Binary tensor container and directory bundles."""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from efk.errors import FormatError
from efk.tensor_io import (
    decode_tensor,
    encode_tensor,
    load_bundle,
    load_tensor,
    save_bundle,
    save_tensor,
)


class TestCodec:
    @pytest.mark.parametrize(
        "shape", [(4,), (3, 5), (2, 3, 4), (2, 2, 2, 3)]
    )
    def test_round_trip(self, shape):
        rng = np.random.default_rng(sum(shape))
        arr = rng.normal(size=shape).astype(np.float32)
        out = decode_tensor(encode_tensor(arr))
        assert out.dtype == np.float32
        np.testing.assert_array_equal(out, arr)

    def test_header_bytes_by_hand(self):
        arr = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        data = encode_tensor(arr)
        assert data[:4] == b"TNSR"
        assert struct.unpack_from("<I", data, 4)[0] == 2
        assert struct.unpack_from("<II", data, 8) == (2, 2)
        assert data[16:] == arr.tobytes()
        assert len(data) == 4 + 4 + 8 + 16

    def test_float64_input_narrows_to_float32(self):
        arr = np.array([1.0000000001], dtype=np.float64)
        out = decode_tensor(encode_tensor(arr))
        assert out.dtype == np.float32
        assert out[0] == np.float32(1.0000000001)

    def test_scalar_promotes_to_rank_one(self):
        out = decode_tensor(encode_tensor(np.float64(7.0)))
        assert out.shape == (1,)
        assert out[0] == 7.0

    def test_rank_limit(self):
        with pytest.raises(FormatError, match="rank"):
            encode_tensor(np.zeros((1,) * 17))

    @pytest.mark.parametrize(
        "mutate,match",
        [
            (lambda b: b[:6], "truncated"),
            (lambda b: b"XXXX" + b[4:], "magic"),
            (lambda b: b[:4] + struct.pack("<I", 0) + b[8:], "rank"),
            (lambda b: b[:4] + struct.pack("<I", 99) + b[8:], "rank"),
            (lambda b: b[:10], "before dimension list"),
            (lambda b: b[:-4], "payload"),
            (lambda b: b + b"\x00\x00\x00\x00", "payload"),
        ],
    )
    def test_malformed_inputs(self, mutate, match):
        base = encode_tensor(np.arange(6.0).reshape(2, 3))
        with pytest.raises(FormatError, match=match):
            decode_tensor(mutate(bytearray(base)))

    def test_file_round_trip(self, tmp_path):
        arr = np.arange(12.0, dtype=np.float32).reshape(3, 4)
        p = tmp_path / "t.tnsr"
        save_tensor(p, arr)
        np.testing.assert_array_equal(load_tensor(p), arr)


@settings(max_examples=40, deadline=None)
@given(
    hnp.arrays(
        dtype=np.float32,
        shape=hnp.array_shapes(min_dims=1, max_dims=4, min_side=1, max_side=6),
        elements=st.floats(allow_nan=False, allow_infinity=False, width=32),
    )
)
def test_round_trip_property(arr):
    np.testing.assert_array_equal(decode_tensor(encode_tensor(arr)), arr)


class TestBundles:
    def test_round_trip_with_extras(self, tmp_path):
        rng = np.random.default_rng(0)
        tensors = {
            "alpha": rng.normal(size=(2, 3)).astype(np.float32),
            "beta": rng.normal(size=(4,)).astype(np.float32),
        }
        save_bundle(tmp_path / "b", tensors, extra={"channels": 4})
        loaded, manifest = load_bundle(tmp_path / "b")
        assert set(loaded) == {"alpha", "beta"}
        for name in tensors:
            np.testing.assert_array_equal(loaded[name], tensors[name])
        assert manifest["channels"] == 4
        assert manifest["tensors"]["alpha"] == [2, 3]

    def test_missing_manifest(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(FormatError, match="manifest.json"):
            load_bundle(tmp_path / "empty")

    def test_manifest_without_tensor_table(self, tmp_path):
        d = tmp_path / "b"
        d.mkdir()
        (d / "manifest.json").write_text("{}")
        with pytest.raises(FormatError, match="tensors"):
            load_bundle(d)

    def test_corrupt_manifest_json(self, tmp_path):
        d = tmp_path / "b"
        d.mkdir()
        (d / "manifest.json").write_text("{nope")
        with pytest.raises(FormatError, match="valid JSON"):
            load_bundle(d)

    def test_listed_tensor_missing_on_disk(self, tmp_path):
        save_bundle(tmp_path / "b", {"alpha": np.zeros(3)})
        (tmp_path / "b" / "alpha.tnsr").unlink()
        with pytest.raises(FormatError, match="alpha"):
            load_bundle(tmp_path / "b")

    def test_shape_mismatch_with_manifest(self, tmp_path):
        save_bundle(tmp_path / "b", {"alpha": np.zeros(3)})
        save_tensor(tmp_path / "b" / "alpha.tnsr", np.zeros(4))
        with pytest.raises(FormatError, match="manifest says"):
            load_bundle(tmp_path / "b")

    def test_manifest_is_deterministic(self, tmp_path):
        tensors = {"z": np.zeros(2), "a": np.ones(3)}
        save_bundle(tmp_path / "one", tensors)
        save_bundle(tmp_path / "two", tensors)
        one = (tmp_path / "one" / "manifest.json").read_bytes()
        two = (tmp_path / "two" / "manifest.json").read_bytes()
        assert one == two
