import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blisscam.events import EventMap
from blisscam.fixtures import make_roinet_bundle, make_zero_roinet_bundle
from blisscam.roi import (
    ConvSpec,
    Roi,
    RoiNetConfig,
    conv2d,
    full_frame_roi,
    mac_count,
    predict_roi_dnn,
    predict_roi_heuristic,
    roinet_forward,
    validate_roi,
)


def events_from_points(shape, points):
    bits = np.zeros(shape, dtype=bool)
    for x, y in points:
        bits[y, x] = True
    return EventMap(bits=bits)


# --- heuristic ----------------------------------------------------------------


def test_heuristic_bounding_box_with_margin():
    ev = events_from_points((400, 640), [(10, 10), (20, 30)])
    assert predict_roi_heuristic(ev, None, margin=2) == Roi(8, 8, 22, 32)


def test_heuristic_empty_full_frame_fallback():
    ev = events_from_points((400, 640), [])
    assert predict_roi_heuristic(ev, None, margin=2) == Roi(0, 0, 639, 399)


def test_heuristic_empty_prev_roi_fallback():
    ev = events_from_points((400, 640), [])
    prev = Roi(5, 6, 7, 8)
    assert predict_roi_heuristic(ev, prev, margin=2) == prev


def test_heuristic_degenerate_single_event():
    ev = events_from_points((400, 640), [(0, 0)])
    assert predict_roi_heuristic(ev, None, margin=0) == Roi(0, 0, 0, 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 63), st.integers(0, 47)), min_size=1, max_size=64),
       st.integers(0, 5))
def test_heuristic_covers_every_event(points, margin):
    ev = events_from_points((48, 64), points)
    roi = predict_roi_heuristic(ev, None, margin)
    for x, y in points:
        assert roi.contains(x, y)


# --- validate ----------------------------------------------------------------


def test_validate_swaps_corners():
    assert validate_roi(22, 32, 8, 8, 640, 400) == Roi(8, 8, 22, 32)


def test_validate_clamps():
    assert validate_roi(-5, 0, 700, 399, 640, 400) == Roi(0, 0, 639, 399)


def test_validate_idempotent():
    roi = validate_roi(3, 4, 20, 30, 640, 400)
    again = validate_roi(roi.x1, roi.y1, roi.x2, roi.y2, 640, 400)
    assert roi == again


@settings(max_examples=100, deadline=None)
@given(st.integers(-50, 700), st.integers(-50, 500), st.integers(-50, 700), st.integers(-50, 500))
def test_validate_idempotent_property(x1, y1, x2, y2):
    r1 = validate_roi(x1, y1, x2, y2, 640, 400)
    r2 = validate_roi(r1.x1, r1.y1, r1.x2, r1.y2, 640, 400)
    assert r1 == r2
    assert 0 <= r1.x1 <= r1.x2 < 640
    assert 0 <= r1.y1 <= r1.y2 < 400


# --- CNN ----------------------------------------------------------------------


def conv2d_oracle(x, weight, bias, stride):
    """Scalar triple-loop SAME conv used as the independent reference."""
    c, h, w = x.shape
    out_c, _, k, _ = weight.shape
    oh, ow = -(-h // stride), -(-w // stride)
    pad_h = max((oh - 1) * stride + k - h, 0)
    pad_w = max((ow - 1) * stride + k - w, 0)
    pt, pl = pad_h // 2, pad_w // 2
    out = np.zeros((out_c, oh, ow))
    for oc in range(out_c):
        for oy in range(oh):
            for ox in range(ow):
                acc = bias[oc]
                for ic in range(c):
                    for ky in range(k):
                        for kx in range(k):
                            y = oy * stride + ky - pt
                            x_ = ox * stride + kx - pl
                            if 0 <= y < h and 0 <= x_ < w:
                                acc += x[ic, y, x_] * weight[oc, ic, ky, kx]
                out[oc, oy, ox] = acc
    return out


@pytest.mark.parametrize("stride", [1, 2, 3])
def test_conv2d_matches_triple_loop_oracle(rng, stride):
    x = rng.normal(size=(3, 11, 14))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    got = conv2d(x, w, b, stride)
    want = conv2d_oracle(x, w, b, stride)
    assert np.allclose(got, want, rtol=1e-10, atol=1e-12)


SMALL = RoiNetConfig(input_height=32, input_width=48, in_channels=2)


def test_zero_weights_give_origin_roi(rng):
    weights = make_zero_roinet_bundle(SMALL)
    ev = EventMap(bits=rng.random((32, 48)) < 0.1)
    roi = predict_roi_dnn(ev, None, weights, SMALL)
    assert roi == Roi(0, 0, 0, 0)


def test_forward_matches_scalar_reference(rng):
    """Full forward against an oracle built from the triple-loop conv."""
    weights = make_roinet_bundle(SMALL, seed=5, scale=0.2)
    x = rng.normal(size=(2, 32, 48))
    got = roinet_forward(x, weights, SMALL)

    feat = x
    in_c = 2
    for i, spec in enumerate(SMALL.convs):
        w = weights[f"roinet.conv{i}.weight"].astype(np.float64)
        b = weights[f"roinet.conv{i}.bias"].astype(np.float64)
        feat = np.maximum(conv2d_oracle(feat, w, b, spec.stride), 0.0)
        in_c = spec.out_channels
    flat = feat.reshape(-1)
    hidden = np.maximum(weights["roinet.fc0.weight"].astype(np.float64) @ flat
                        + weights["roinet.fc0.bias"].astype(np.float64), 0.0)
    want = weights["roinet.fc1.weight"].astype(np.float64) @ hidden \
        + weights["roinet.fc1.bias"].astype(np.float64)
    rel = np.abs(got - want) / np.maximum(np.abs(want), 1e-9)
    assert rel.max() < 1e-5


def test_default_mac_budget():
    macs = mac_count(RoiNetConfig())
    assert macs == 20_480_256
    assert abs(macs - 2.1e7) / 2.1e7 <= 0.10


def test_mac_count_small_config_by_hand():
    cfg = RoiNetConfig(
        input_height=8, input_width=8, in_channels=1,
        convs=(ConvSpec(2, 3, 2),), fc_hidden=3, outputs=4,
    )
    # conv: 4x4 out, 2 ch, 3x3 kernel, 1 in ch = 288; fc0: 32*3 = 96; fc1: 12
    assert mac_count(cfg) == 288 + 96 + 12


def test_forward_output_maps_to_valid_roi(rng):
    weights = make_roinet_bundle(SMALL, seed=6, scale=0.5)
    ev = EventMap(bits=rng.random((32, 48)) < 0.2)
    roi = predict_roi_dnn(ev, rng.random((32, 48)), weights, SMALL)
    assert 0 <= roi.x1 <= roi.x2 < 48
    assert 0 <= roi.y1 <= roi.y2 < 32


def test_full_frame_helper():
    assert full_frame_roi(640, 400) == Roi(0, 0, 639, 399)


def test_weight_shape_mismatch_names_tensor(rng):
    from blisscam.errors import WeightFormatError
    from blisscam.weights import WeightBundle

    good = make_roinet_bundle(SMALL, seed=1)
    bad = WeightBundle()
    for name, arr in good.items():
        bad.add(name, arr[:-1] if name == "roinet.fc0.bias" else arr)
    ev = EventMap(bits=rng.random((32, 48)) < 0.1)
    with pytest.raises(WeightFormatError, match="roinet.fc0.bias"):
        predict_roi_dnn(ev, None, bad, SMALL)
