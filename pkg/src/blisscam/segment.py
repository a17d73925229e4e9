"""Host-side eye segmentation and gaze regression.

The segmenter is a vision transformer over patch tokens of the ROI grid:
linear patch projection (value channel plus a validity channel marking
sampled pixels), learned positional embeddings, pre-norm encoder blocks,
then decoder blocks of the same shape and a linear class head. Class logits
are per patch and are unfolded to pixels before the argmax.

Positional embeddings are stored for a maximum token grid and sliced to the
ROI's token grid, which keeps the forward pass deterministic for any ROI
not exceeding the configured frame.

Patch vector layout (must match any external weight producer): pixels in
row-major order within the patch, channels contiguous per pixel
(index = (py * patch + px) * channels + c).

Weight tensor names:
    vit.embed.weight (dim, patch*patch*channels)   vit.embed.bias (dim,)
    vit.pos_embed    (grid_h, grid_w, dim)
    vit.{enc|dec}{i}.ln1.gamma/.beta               (dim,)
    vit.{enc|dec}{i}.attn.qkv.weight (3*dim, dim)  .attn.qkv.bias (3*dim,)
    vit.{enc|dec}{i}.attn.out.weight (dim, dim)    .attn.out.bias (dim,)
    vit.{enc|dec}{i}.ln2.gamma/.beta               (dim,)
    vit.{enc|dec}{i}.mlp.fc0.weight (hidden, dim)  .mlp.fc0.bias (hidden,)
    vit.{enc|dec}{i}.mlp.fc1.weight (dim, hidden)  .mlp.fc1.bias (dim,)
    vit.final_ln.gamma/.beta (dim,)
    vit.head.weight (classes, dim)                 vit.head.bias (classes,)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, NoPupilError, WeightFormatError
from .roi import Roi, full_frame_roi
from .scene import CLASS_PUPIL, GazeCalibration, GroundTruth, write_pgm
from .weights import WeightBundle

LN_EPS = 1e-5


@dataclass
class SegMap:
    labels: np.ndarray  # (roi.height, roi.width) uint8 in {0..3}
    roi: Roi
    frame_index: int = 0


@dataclass(frozen=True)
class GazeVector:
    vertical: float  # degrees
    horizontal: float  # degrees


@dataclass(frozen=True)
class VitConfig:
    patch_size: int = 16
    embed_dim: int = 192
    heads: int = 3
    encoder_blocks: int = 12
    decoder_blocks: int = 2
    class_count: int = 4
    mlp_ratio: int = 4
    in_channels: int = 2  # value + validity
    max_grid_h: int = 25  # 400 / 16
    max_grid_w: int = 40  # 640 / 16

    def __post_init__(self) -> None:
        if self.embed_dim % self.heads != 0:
            raise ConfigError("embed_dim must be divisible by heads")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    @property
    def mlp_hidden(self) -> int:
        return self.embed_dim * self.mlp_ratio


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + LN_EPS) * gamma + beta


def gelu(x: np.ndarray) -> np.ndarray:
    # tanh approximation; mirrored exactly by external weight producers
    return 0.5 * x * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (x + 0.044715 * x**3)))


def softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def multi_head_attention(
    x: np.ndarray,
    qkv_w: np.ndarray,
    qkv_b: np.ndarray,
    out_w: np.ndarray,
    out_b: np.ndarray,
    heads: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Self-attention over (n, dim) tokens; returns (output, attention).

    attention has shape (heads, n, n); each row is a softmax distribution.
    """
    n, dim = x.shape
    head_dim = dim // heads
    qkv = x @ qkv_w.T + qkv_b  # (n, 3*dim)
    q, k, v = qkv[:, :dim], qkv[:, dim : 2 * dim], qkv[:, 2 * dim :]

    def split(t: np.ndarray) -> np.ndarray:
        return t.reshape(n, heads, head_dim).transpose(1, 0, 2)

    qh, kh, vh = split(q), split(k), split(v)
    scores = qh @ kh.transpose(0, 2, 1) / np.sqrt(head_dim)
    attn = softmax(scores)
    ctx = attn @ vh  # (heads, n, head_dim)
    merged = ctx.transpose(1, 0, 2).reshape(n, dim)
    return merged @ out_w.T + out_b, attn


def _t(weights: WeightBundle, name: str, shape: tuple[int, ...]) -> np.ndarray:
    arr = weights[name]
    if arr.shape != shape:
        raise WeightFormatError(f"{name}: shape {arr.shape}, expected {shape}")
    return arr.astype(np.float64)


def _block(x: np.ndarray, weights: WeightBundle, prefix: str, cfg: VitConfig) -> np.ndarray:
    d, hidden = cfg.embed_dim, cfg.mlp_hidden
    normed = layer_norm(x, _t(weights, f"{prefix}.ln1.gamma", (d,)), _t(weights, f"{prefix}.ln1.beta", (d,)))
    attn_out, _ = multi_head_attention(
        normed,
        _t(weights, f"{prefix}.attn.qkv.weight", (3 * d, d)),
        _t(weights, f"{prefix}.attn.qkv.bias", (3 * d,)),
        _t(weights, f"{prefix}.attn.out.weight", (d, d)),
        _t(weights, f"{prefix}.attn.out.bias", (d,)),
        cfg.heads,
    )
    x = x + attn_out
    normed = layer_norm(x, _t(weights, f"{prefix}.ln2.gamma", (d,)), _t(weights, f"{prefix}.ln2.beta", (d,)))
    h = gelu(normed @ _t(weights, f"{prefix}.mlp.fc0.weight", (hidden, d)).T + _t(weights, f"{prefix}.mlp.fc0.bias", (hidden,)))
    return x + h @ _t(weights, f"{prefix}.mlp.fc1.weight", (d, hidden)).T + _t(weights, f"{prefix}.mlp.fc1.bias", (d,))


def patchify(grid: np.ndarray, validity: np.ndarray, patch: int) -> tuple[np.ndarray, int, int]:
    """Zero-pad to patch multiples and stack patch vectors.

    Returns (tokens (n, patch*patch*2), grid_h, grid_w).
    """
    h, w = grid.shape
    gh, gw = -(-h // patch), -(-w // patch)
    padded = np.zeros((gh * patch, gw * patch), dtype=np.float64)
    padded[:h, :w] = grid
    vpad = np.zeros_like(padded)
    vpad[:h, :w] = validity
    stacked = np.stack([padded, vpad], axis=-1)  # (H, W, 2)
    tokens = (
        stacked.reshape(gh, patch, gw, patch, 2)
        .transpose(0, 2, 1, 3, 4)
        .reshape(gh * gw, patch * patch * 2)
    )
    return tokens, gh, gw


def vit_patch_logits(
    grid: np.ndarray,
    validity: np.ndarray,
    weights: WeightBundle,
    cfg: VitConfig,
) -> tuple[np.ndarray, int, int]:
    """Forward pass to per-patch class logits (n_tokens, class_count)."""
    if grid.shape != validity.shape:
        raise ContractError("grid and validity shapes differ")
    tokens, gh, gw = patchify(grid, validity, cfg.patch_size)
    if gh > cfg.max_grid_h or gw > cfg.max_grid_w:
        raise ContractError(
            f"token grid {gh}x{gw} exceeds positional table {cfg.max_grid_h}x{cfg.max_grid_w}"
        )
    d = cfg.embed_dim
    vec = cfg.patch_size * cfg.patch_size * cfg.in_channels
    x = tokens @ _t(weights, "vit.embed.weight", (d, vec)).T + _t(weights, "vit.embed.bias", (d,))
    pos = _t(weights, "vit.pos_embed", (cfg.max_grid_h, cfg.max_grid_w, d))
    x = x + pos[:gh, :gw].reshape(gh * gw, d)
    for i in range(cfg.encoder_blocks):
        x = _block(x, weights, f"vit.enc{i}", cfg)
    for i in range(cfg.decoder_blocks):
        x = _block(x, weights, f"vit.dec{i}", cfg)
    x = layer_norm(x, _t(weights, "vit.final_ln.gamma", (d,)), _t(weights, "vit.final_ln.beta", (d,)))
    logits = x @ _t(weights, "vit.head.weight", (cfg.class_count, d)).T + _t(weights, "vit.head.bias", (cfg.class_count,))
    return logits, gh, gw


def vit_forward(
    sparse_grid: np.ndarray,
    weights: WeightBundle,
    cfg: VitConfig,
    roi: Roi | None = None,
    frame_index: int = 0,
    max_dn: int = 1023,
    validity: np.ndarray | None = None,
) -> SegMap:
    """Segment a sparse ROI grid (zeros = unsampled) into class labels.

    For dense inputs pass an explicit all-ones `validity`; by default a zero
    pixel is taken to mean "not sampled".
    """
    grid = np.asarray(sparse_grid, dtype=np.float64)
    if validity is None:
        validity = (grid > 0).astype(np.float64)
    logits, gh, gw = vit_patch_logits(grid / float(max_dn), validity, weights, cfg)
    p = cfg.patch_size
    patch_labels = np.argmax(logits, axis=-1).astype(np.uint8).reshape(gh, gw)
    pixels = np.repeat(np.repeat(patch_labels, p, axis=0), p, axis=1)
    h, w = grid.shape
    if roi is None:
        roi = Roi(0, 0, w - 1, h - 1)
    return SegMap(labels=pixels[:h, :w], roi=roi, frame_index=frame_index)


def vit_mac_count(cfg: VitConfig, n_tokens: int) -> int:
    """Counted multiply-accumulates for one forward pass over n_tokens."""
    d, hid = cfg.embed_dim, cfg.mlp_hidden
    vec = cfg.patch_size * cfg.patch_size * cfg.in_channels
    blocks = cfg.encoder_blocks + cfg.decoder_blocks
    per_block = (
        n_tokens * 3 * d * d  # qkv projection
        + 2 * n_tokens * n_tokens * d  # scores and context
        + n_tokens * d * d  # output projection
        + 2 * n_tokens * d * hid  # mlp
    )
    return n_tokens * vec * d + blocks * per_block + n_tokens * d * cfg.class_count


def oracle_segment(
    truth: GroundTruth, frame_index: int, roi: Roi, mask: np.ndarray | None = None
) -> SegMap:
    """Ground-truth labels cropped to the ROI (test/baseline segmenter)."""
    del mask  # labels do not depend on which pixels were sampled
    labels = truth.seg_maps[frame_index, roi.y1 : roi.y2 + 1, roi.x1 : roi.x2 + 1]
    return SegMap(labels=labels.copy(), roi=roi, frame_index=frame_index)


def predict_gaze(
    seg: SegMap, calib: GazeCalibration, min_pupil_pixels: int = 10
) -> GazeVector:
    """Pupil centroid (full-frame coordinates) through the affine calibration."""
    ys, xs = np.nonzero(seg.labels == CLASS_PUPIL)
    if ys.size < min_pupil_pixels:
        raise NoPupilError(f"only {ys.size} pupil pixels (need {min_pupil_pixels})")
    # mean over absolute integer coordinates: bit-identical whether the same
    # pupil pixels arrive via a crop or the full frame
    cx = float((xs + seg.roi.x1).mean())
    cy = float((ys + seg.roi.y1).mean())
    v, h = calib.angles(cx, cy)
    return GazeVector(vertical=v, horizontal=h)


def angular_error(pred: GazeVector, truth: GazeVector) -> tuple[float, float]:
    return abs(pred.vertical - truth.vertical), abs(pred.horizontal - truth.horizontal)


def save_seg_pgm(seg: SegMap, path) -> None:
    """Dump labels as gray levels {0, 64, 128, 192}."""
    write_pgm(path, (seg.labels.astype(np.uint8) * 64))


SEG_FEEDBACK_HEADER = 16


def seg_feedback_bytes(roi_area: int) -> int:
    """Wire size of a segmentation map sent back to the sensor (2-bit labels)."""
    return SEG_FEEDBACK_HEADER + (roi_area + 3) // 4


def pack_seg_feedback(seg: SegMap) -> bytes:
    import struct

    flat = seg.labels.reshape(-1)
    pad = (-len(flat)) % 4
    padded = np.concatenate([flat, np.zeros(pad, dtype=np.uint8)])
    quads = padded.reshape(-1, 4)
    packed = (quads[:, 0] << 6) | (quads[:, 1] << 4) | (quads[:, 2] << 2) | quads[:, 3]
    header = struct.pack(
        "<4sHHHHI", b"BSEG", seg.roi.x1, seg.roi.y1, seg.roi.x2, seg.roi.y2, seg.frame_index
    )
    return header + packed.astype(np.uint8).tobytes()


def unpack_seg_feedback(data: bytes) -> SegMap:
    import struct

    magic, x1, y1, x2, y2, frame_index = struct.unpack_from("<4sHHHHI", data, 0)
    if magic != b"BSEG":
        raise WeightFormatError(f"bad feedback magic {magic!r}")
    roi = Roi(x1, y1, x2, y2)
    packed = np.frombuffer(data, dtype=np.uint8, offset=SEG_FEEDBACK_HEADER)
    quads = np.stack(
        [(packed >> 6) & 3, (packed >> 4) & 3, (packed >> 2) & 3, packed & 3], axis=1
    ).reshape(-1)
    labels = quads[: roi.area].reshape(roi.height, roi.width).astype(np.uint8)
    return SegMap(labels=labels, roi=roi, frame_index=frame_index)


def fit_identity_calibration(scene_calib: GazeCalibration) -> GazeCalibration:
    """The calibration that reproduces the scene's ground-truth map."""
    return scene_calib


def full_frame_oracle_gaze(truth: GroundTruth, frame_index: int, calib: GazeCalibration, width: int, height: int) -> GazeVector:
    seg = oracle_segment(truth, frame_index, full_frame_roi(width, height))
    return predict_gaze(seg, calib)
