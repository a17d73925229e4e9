"""ROI prediction: deterministic bounding-box heuristic and a small CNN.

The CNN is three stride-n 3x3 conv layers (ReLU) and two fully connected
layers producing four normalized corner coordinates. Default channel widths
and strides put the forward pass at 2.048e7 multiply-accumulates on a
640x400 two-channel input (event map + previous-segmentation cue), within
the in-sensor compute budget. Convolutions use SAME padding with ceil
output sizing (pad split low/high, extra pixel on the high side).

Weight tensor names, in bundle order:
    roinet.conv{i}.weight  (out_c, in_c, k, k)
    roinet.conv{i}.bias    (out_c,)
    roinet.fc{i}.weight    (out, in)
    roinet.fc{i}.bias      (out,)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, WeightFormatError
from .events import EventMap
from .weights import WeightBundle


@dataclass(frozen=True)
class Roi:
    """Axis-aligned rectangle with inclusive corners."""

    x1: int
    y1: int
    x2: int
    y2: int

    @property
    def width(self) -> int:
        return self.x2 - self.x1 + 1

    @property
    def height(self) -> int:
        return self.y2 - self.y1 + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains(self, x: int, y: int) -> bool:
        return self.x1 <= x <= self.x2 and self.y1 <= y <= self.y2


def full_frame_roi(width: int, height: int) -> Roi:
    return Roi(0, 0, width - 1, height - 1)


def validate_roi(x1: int, y1: int, x2: int, y2: int, width: int, height: int) -> Roi:
    """Swap inverted corners and clamp into the frame. Idempotent."""
    if x1 > x2:
        x1, x2 = x2, x1
    if y1 > y2:
        y1, y2 = y2, y1
    x1 = min(max(x1, 0), width - 1)
    x2 = min(max(x2, 0), width - 1)
    y1 = min(max(y1, 0), height - 1)
    y2 = min(max(y2, 0), height - 1)
    return Roi(x1, y1, x2, y2)


def predict_roi_heuristic(events: EventMap, prev_roi: Roi | None, margin: int) -> Roi:
    """Tight bounding box of set event bits, dilated by `margin`.

    No events: fall back to the previous ROI, else the full frame.
    """
    if margin < 0:
        raise ContractError("margin must be >= 0")
    h, w = events.bits.shape
    ys, xs = np.nonzero(events.bits)
    if ys.size == 0:
        return prev_roi if prev_roi is not None else full_frame_roi(w, h)
    return validate_roi(
        int(xs.min()) - margin,
        int(ys.min()) - margin,
        int(xs.max()) + margin,
        int(ys.max()) + margin,
        w,
        h,
    )


@dataclass(frozen=True)
class ConvSpec:
    out_channels: int
    kernel: int = 3
    stride: int = 2


@dataclass(frozen=True)
class RoiNetConfig:
    input_height: int = 400
    input_width: int = 640
    in_channels: int = 2  # event map + previous-segmentation cue
    convs: tuple[ConvSpec, ...] = (
        ConvSpec(8, 3, 2),
        ConvSpec(16, 3, 4),
        ConvSpec(32, 3, 2),
    )
    fc_hidden: int = 64
    outputs: int = 4

    def feature_shapes(self) -> list[tuple[int, int, int]]:
        """(channels, height, width) after each conv layer."""
        c, h, w = self.in_channels, self.input_height, self.input_width
        shapes = []
        for spec in self.convs:
            h = -(-h // spec.stride)
            w = -(-w // spec.stride)
            c = spec.out_channels
            shapes.append((c, h, w))
        return shapes

    @property
    def flat_features(self) -> int:
        c, h, w = self.feature_shapes()[-1]
        return c * h * w


def mac_count(cfg: RoiNetConfig) -> int:
    """Multiply-accumulates of one forward pass (conv + fc, biases excluded)."""
    total = 0
    in_c = cfg.in_channels
    for spec, (out_c, h, w) in zip(cfg.convs, cfg.feature_shapes()):
        total += h * w * out_c * spec.kernel * spec.kernel * in_c
        in_c = out_c
    total += cfg.flat_features * cfg.fc_hidden
    total += cfg.fc_hidden * cfg.outputs
    return total


def _same_pad(size: int, stride: int, kernel: int) -> tuple[int, int]:
    out = -(-size // stride)
    pad = max((out - 1) * stride + kernel - size, 0)
    return pad // 2, pad - pad // 2


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int) -> np.ndarray:
    """SAME-padded strided convolution; x is (C, H, W), weight (O, C, k, k)."""
    c, h, w = x.shape
    out_c, in_c, k, _ = weight.shape
    if in_c != c:
        raise WeightFormatError(f"conv expects {c} input channels, weight has {in_c}")
    pt, pb = _same_pad(h, stride, k)
    pl, pr = _same_pad(w, stride, k)
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr)))
    oh, ow = -(-h // stride), -(-w // stride)
    # im2col: gather (C*k*k, oh*ow) patches, then one matmul.
    cols = np.empty((c * k * k, oh * ow), dtype=np.float64)
    idx = 0
    for ci in range(c):
        for ky in range(k):
            for kx in range(k):
                patch = xp[ci, ky : ky + oh * stride : stride, kx : kx + ow * stride : stride]
                cols[idx] = patch.reshape(-1)
                idx += 1
    out = weight.reshape(out_c, -1).astype(np.float64) @ cols
    out += bias.astype(np.float64)[:, None]
    return out.reshape(out_c, oh, ow)


def _tensor(weights: WeightBundle, name: str, shape: tuple[int, ...]) -> np.ndarray:
    arr = weights[name]
    if arr.shape != shape:
        raise WeightFormatError(f"{name}: shape {arr.shape}, expected {shape}")
    return arr


def roinet_forward(x: np.ndarray, weights: WeightBundle, cfg: RoiNetConfig) -> np.ndarray:
    """Raw forward pass: (in_channels, H, W) input -> 4 real outputs."""
    if x.shape != (cfg.in_channels, cfg.input_height, cfg.input_width):
        raise ContractError(
            f"input shape {x.shape} != ({cfg.in_channels}, {cfg.input_height}, {cfg.input_width})"
        )
    feat = x.astype(np.float64)
    in_c = cfg.in_channels
    for i, spec in enumerate(cfg.convs):
        w = _tensor(weights, f"roinet.conv{i}.weight", (spec.out_channels, in_c, spec.kernel, spec.kernel))
        b = _tensor(weights, f"roinet.conv{i}.bias", (spec.out_channels,))
        feat = np.maximum(conv2d(feat, w, b, spec.stride), 0.0)
        in_c = spec.out_channels
    flat = feat.reshape(-1)
    w1 = _tensor(weights, "roinet.fc0.weight", (cfg.fc_hidden, cfg.flat_features))
    b1 = _tensor(weights, "roinet.fc0.bias", (cfg.fc_hidden,))
    hidden = np.maximum(w1.astype(np.float64) @ flat + b1, 0.0)
    w2 = _tensor(weights, "roinet.fc1.weight", (cfg.outputs, cfg.fc_hidden))
    b2 = _tensor(weights, "roinet.fc1.bias", (cfg.outputs,))
    return w2.astype(np.float64) @ hidden + b2


def seg_feedback_channel(seg_labels: np.ndarray | None, roi: Roi | None, height: int, width: int) -> np.ndarray:
    """Previous-frame segmentation as a [0,1] full-frame channel (0 if absent)."""
    channel = np.zeros((height, width), dtype=np.float64)
    if seg_labels is not None and roi is not None:
        channel[roi.y1 : roi.y2 + 1, roi.x1 : roi.x2 + 1] = seg_labels / 3.0
    return channel


def predict_roi_dnn(
    events: EventMap,
    prev_seg_channel: np.ndarray | None,
    weights: WeightBundle,
    cfg: RoiNetConfig,
) -> Roi:
    """CNN forward pass -> normalized corners -> valid pixel ROI."""
    h, w = events.bits.shape
    x = np.zeros((cfg.in_channels, cfg.input_height, cfg.input_width), dtype=np.float64)
    x[0, :h, :w] = events.bits
    if prev_seg_channel is not None and cfg.in_channels > 1:
        x[1, : prev_seg_channel.shape[0], : prev_seg_channel.shape[1]] = prev_seg_channel
    out = roinet_forward(x, weights, cfg)
    x1 = int(round(float(out[0]) * (w - 1)))
    y1 = int(round(float(out[1]) * (h - 1)))
    x2 = int(round(float(out[2]) * (w - 1)))
    y2 = int(round(float(out[3]) * (h - 1)))
    return validate_roi(x1, y1, x2, y2, w, h)
