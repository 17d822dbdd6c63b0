import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from samcl.errors import CheckpointMissingError, FormatError
from samcl.tensor import checkpoint


def test_round_trip_tensors_and_meta(tmp_path, rng):
    tensors = {"a.weight": rng.normal(size=(2, 3, 3, 3)), "a.bias": np.zeros(2), "scalar": np.array(4.5)}
    meta = {"epoch": 3, "net": {"depth": 3}, "val_miou": 0.125}
    path = tmp_path / "m.sckp"
    checkpoint.save(path, tensors, meta)
    got, got_meta = checkpoint.load(path)
    assert list(got) == list(tensors)
    for k in tensors:
        np.testing.assert_array_equal(got[k], tensors[k])
        assert got[k].shape == tensors[k].shape
    assert got_meta == meta


@given(arrays(np.float64, array_shapes(min_dims=0, max_dims=4, max_side=4),
              elements=st.floats(allow_nan=False, allow_infinity=True)))
def test_round_trip_bit_exact(arr):
    got, _ = checkpoint.decode(checkpoint.encode({"x": arr}))
    assert got["x"].tobytes() == np.asarray(arr, dtype="<f8").tobytes()


def test_header_layout():
    buf = checkpoint.encode({"w": np.array([1.0, 2.0])})
    assert buf[:4] == b"SCKP"
    assert struct.unpack_from("<I", buf, 4)[0] == 1
    assert struct.unpack_from("<I", buf, 8)[0] == 1 and buf[12:13] == b"w"
    assert struct.unpack_from("<2I", buf, 13) == (1, 2)
    assert struct.unpack_from("<2d", buf, 21) == (1.0, 2.0)
    assert len(buf) == 37


def test_bad_magic_offset_zero():
    buf = b"XXXX" + checkpoint.encode({"w": np.ones(1)})[4:]
    with pytest.raises(FormatError) as exc:
        checkpoint.decode(buf)
    assert exc.value.offset == 0


def test_bad_version_offset_four():
    buf = bytearray(checkpoint.encode({"w": np.ones(1)}))
    buf[4] = 9
    with pytest.raises(FormatError) as exc:
        checkpoint.decode(bytes(buf))
    assert exc.value.offset == 4


def test_truncated_payload_reports_entry_offset():
    buf = checkpoint.encode({"w": np.ones(4)})
    with pytest.raises(FormatError) as exc:
        checkpoint.decode(buf[:-3])
    # payload starts after magic, version, name_len, name, ndim and one dim
    assert exc.value.offset == 4 + 4 + 4 + 1 + 4 + 4


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointMissingError):
        checkpoint.load(tmp_path / "nope.sckp")
