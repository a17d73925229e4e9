import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blisscam.errors import WeightFormatError
from blisscam.weights import (
    MAGIC,
    WeightBundle,
    bundle_from_bytes,
    bundle_to_bytes,
    read_bundle,
    write_bundle,
)


def make_bundle(*tensors):
    b = WeightBundle()
    for name, arr in tensors:
        b.add(name, arr)
    return b


def test_empty_bundle_roundtrip(tmp_path):
    path = tmp_path / "empty.blwb"
    write_bundle(WeightBundle(), path)
    assert read_bundle(path) == WeightBundle()


def test_known_tensor_roundtrip(tmp_path):
    arr = np.array([[1.0, 2.5, -3.0], [0.0, 1e-7, 4096.0]], dtype=np.float32)
    b = make_bundle(("w", arr))
    path = tmp_path / "w.blwb"
    write_bundle(b, path)
    back = read_bundle(path)
    assert np.array_equal(back["w"], arr)
    # bit-exact file round-trip
    assert bundle_to_bytes(back) == path.read_bytes()


def test_byte_layout_is_pinned():
    arr = np.arange(6, dtype=np.float32).reshape(2, 3)
    data = bundle_to_bytes(make_bundle(("ab", arr)))
    expected = (
        b"BLWB"
        + struct.pack("<II", 1, 1)
        + struct.pack("<H", 2)
        + b"ab"
        + struct.pack("<B", 2)
        + struct.pack("<II", 2, 3)
        + arr.tobytes()
    )
    assert data == expected


def test_bad_magic():
    with pytest.raises(WeightFormatError, match="magic"):
        bundle_from_bytes(b"XXXX" + b"\x00" * 20)


def test_truncated_payload():
    data = bundle_to_bytes(make_bundle(("w", np.ones((4, 4), np.float32))))
    with pytest.raises(WeightFormatError, match="truncated"):
        bundle_from_bytes(data[:-8])


def test_truncated_multibyte_name():
    data = bundle_to_bytes(make_bundle(("wéights", np.ones(2, np.float32))))
    # cut inside the UTF-8 name: still a format error, not a decode crash
    with pytest.raises(WeightFormatError, match="truncated"):
        bundle_from_bytes(data[:14])


def test_duplicate_names_rejected_on_add():
    b = make_bundle(("w", np.ones(2, np.float32)))
    with pytest.raises(WeightFormatError, match="duplicate"):
        b.add("w", np.ones(3, np.float32))


def test_duplicate_names_rejected_on_read():
    one = bundle_to_bytes(make_bundle(("w", np.ones(2, np.float32))))
    record = one[12:]  # strip header, keep the single tensor record
    doubled = MAGIC + struct.pack("<II", 1, 2) + record + record
    with pytest.raises(WeightFormatError, match="duplicate"):
        bundle_from_bytes(doubled)


def test_dim_overflow_rejected():
    data = (
        MAGIC
        + struct.pack("<II", 1, 1)
        + struct.pack("<H", 1)
        + b"w"
        + struct.pack("<B", 2)
        + struct.pack("<II", 1 << 20, 1 << 20)
    )
    with pytest.raises(WeightFormatError, match="overflow"):
        bundle_from_bytes(data)


def test_trailing_bytes_rejected():
    data = bundle_to_bytes(make_bundle(("w", np.ones(2, np.float32))))
    with pytest.raises(WeightFormatError, match="trailing"):
        bundle_from_bytes(data + b"\x00")


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.text(min_size=1, max_size=12),
            st.lists(st.integers(1, 4), min_size=1, max_size=3),
        ),
        max_size=4,
        unique_by=lambda t: t[0],
    ),
    st.integers(0, 2**31 - 1),
)
def test_roundtrip_property(specs, seed):
    rng = np.random.default_rng(seed)
    b = WeightBundle()
    for name, dims in specs:
        b.add(name, rng.normal(size=dims).astype(np.float32))
    assert bundle_from_bytes(bundle_to_bytes(b)) == b
