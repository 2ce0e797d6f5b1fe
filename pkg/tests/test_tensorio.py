import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from plstm import tensorio
from plstm.errors import ShapeError


@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=0, max_dims=4, min_side=0, max_side=5),
                  elements=st.floats(allow_nan=False)))
def test_round_trip_is_exact(a):
    b = tensorio.loads(tensorio.dumps(a))
    assert b.shape == a.shape
    np.testing.assert_array_equal(b, a)


def test_layout_is_little_endian_with_u64_dims(tmp_path):
    a = np.arange(6, dtype=float).reshape(2, 3)
    data = tensorio.dumps(a)
    assert data[:6] == b"PTNSR1"
    assert struct.unpack_from("<I2Q", data, 6) == (2, 2, 3)
    assert struct.unpack_from("<d", data, 26)[0] == 0.0
    assert len(data) == 26 + 6 * 8
    tensorio.save(tmp_path / "a.ptnsr", a)
    np.testing.assert_array_equal(tensorio.load(tmp_path / "a.ptnsr"), a)


@pytest.mark.parametrize("data", [b"PTNSR2" + bytes(12), b"PTNSR1", b"PTNSR1" + struct.pack("<IQ", 1, 3) + bytes(16)])
def test_corrupt_data_is_rejected(data):
    with pytest.raises(ShapeError):
        tensorio.loads(data)
