import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blisscam.errors import ContractError
from blisscam.events import eventify, pack_event_bits, unpack_event_bits
from blisscam.sensor import Frame


def frame(values):
    return Frame(dn=np.asarray(values, dtype=np.uint16))


def eventify_oracle(prev, curr, sigma):
    h, w = prev.shape
    out = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            out[y, x] = abs(int(curr[y, x]) - int(prev[y, x])) > sigma
    return out


def test_identical_frames_no_events():
    a = frame(np.full((8, 8), 100))
    assert eventify(a, a, 15).count == 0


def test_single_pixel_above_threshold():
    prev = np.zeros((4, 4), dtype=np.uint16)
    curr = prev.copy()
    curr[2, 3] = 16
    ev = eventify(frame(prev), frame(curr), 15)
    assert ev.count == 1 and ev.bits[2, 3]


def test_boundary_diff_equal_sigma_is_not_event():
    prev = np.zeros((3, 3), dtype=np.uint16)
    curr = np.full((3, 3), 15, dtype=np.uint16)
    assert eventify(frame(prev), frame(curr), 15).count == 0


def test_dimension_mismatch_raises():
    with pytest.raises(ContractError, match="shapes differ"):
        eventify(frame(np.zeros((2, 2))), frame(np.zeros((3, 2))), 15)


def test_symmetry_and_monotonicity(rng):
    a = rng.integers(0, 1024, size=(40, 60)).astype(np.uint16)
    b = rng.integers(0, 1024, size=(40, 60)).astype(np.uint16)
    e_ab = eventify(frame(a), frame(b), 15).bits
    e_ba = eventify(frame(b), frame(a), 15).bits
    assert np.array_equal(e_ab, e_ba)
    looser = eventify(frame(a), frame(b), 40).bits
    assert not np.any(looser & ~e_ab)  # raising sigma never adds events


def test_oracle_equivalence_on_1000_pairs(rng):
    for _ in range(1000):
        shape = (rng.integers(1, 14), rng.integers(1, 14))
        sigma = int(rng.integers(0, 60))
        a = rng.integers(0, 1024, size=shape).astype(np.uint16)
        b = rng.integers(0, 1024, size=shape).astype(np.uint16)
        got = eventify(frame(a), frame(b), sigma).bits
        assert np.array_equal(got, eventify_oracle(a, b, sigma))


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.uint16, (6, 9), elements=st.integers(0, 1023)),
    arrays(np.uint16, (6, 9), elements=st.integers(0, 1023)),
    st.integers(0, 100),
)
def test_eventify_matches_numpy_oracle(a, b, sigma):
    got = eventify(frame(a), frame(b), sigma).bits
    want = np.abs(a.astype(int) - b.astype(int)) > sigma
    assert np.array_equal(got, want)


def test_packed_raster_roundtrip(rng):
    bits = rng.random((23, 37)) < 0.3
    ev = eventify(frame(np.zeros((23, 37))), frame(bits.astype(np.uint16) * 100), 15)
    assert np.array_equal(ev.bits, bits)
    packed = pack_event_bits(ev)
    assert len(packed) == (23 * 37 + 7) // 8
    back = unpack_event_bits(packed, 37, 23)
    assert np.array_equal(back.bits, bits)


def test_packed_raster_is_msb_first():
    bits = np.zeros((1, 8), dtype=bool)
    bits[0, 0] = True  # first pixel in the row -> most significant bit
    ev = eventify(frame(np.zeros((1, 8))), frame(bits.astype(np.uint16) * 100), 15)
    assert pack_event_bits(ev) == b"\x80"
