"""Deterministic fixture weight bundles for tests and demos.

These are random (seeded) weights, not trained ones: they exercise forward
passes, the bundle format, and parity checks without any training artifact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .roi import RoiNetConfig
from .segment import VitConfig
from .weights import WeightBundle

TINY_VIT = VitConfig(
    patch_size=8,
    embed_dim=32,
    heads=2,
    encoder_blocks=2,
    decoder_blocks=1,
    class_count=4,
    mlp_ratio=2,
    max_grid_h=8,
    max_grid_w=8,
)

SMALL_ROINET = RoiNetConfig(input_height=64, input_width=64, in_channels=2)


def make_vit_bundle(cfg: VitConfig, seed: int = 0, scale: float = 0.05) -> WeightBundle:
    rng = np.random.default_rng(seed)
    b = WeightBundle()
    d, hid = cfg.embed_dim, cfg.mlp_hidden
    vec = cfg.patch_size * cfg.patch_size * cfg.in_channels

    def rand(name: str, *shape: int) -> None:
        b.add(name, rng.normal(0.0, scale, size=shape).astype(np.float32))

    rand("vit.embed.weight", d, vec)
    rand("vit.embed.bias", d)
    rand("vit.pos_embed", cfg.max_grid_h, cfg.max_grid_w, d)
    for kind, blocks in (("enc", cfg.encoder_blocks), ("dec", cfg.decoder_blocks)):
        for i in range(blocks):
            p = f"vit.{kind}{i}"
            b.add(f"{p}.ln1.gamma", np.ones(d, dtype=np.float32))
            b.add(f"{p}.ln1.beta", np.zeros(d, dtype=np.float32))
            rand(f"{p}.attn.qkv.weight", 3 * d, d)
            rand(f"{p}.attn.qkv.bias", 3 * d)
            rand(f"{p}.attn.out.weight", d, d)
            rand(f"{p}.attn.out.bias", d)
            b.add(f"{p}.ln2.gamma", np.ones(d, dtype=np.float32))
            b.add(f"{p}.ln2.beta", np.zeros(d, dtype=np.float32))
            rand(f"{p}.mlp.fc0.weight", hid, d)
            rand(f"{p}.mlp.fc0.bias", hid)
            rand(f"{p}.mlp.fc1.weight", d, hid)
            rand(f"{p}.mlp.fc1.bias", d)
    b.add("vit.final_ln.gamma", np.ones(d, dtype=np.float32))
    b.add("vit.final_ln.beta", np.zeros(d, dtype=np.float32))
    rand("vit.head.weight", cfg.class_count, d)
    rand("vit.head.bias", cfg.class_count)
    return b


def make_roinet_bundle(cfg: RoiNetConfig, seed: int = 0, scale: float = 0.05) -> WeightBundle:
    rng = np.random.default_rng(seed)
    b = WeightBundle()
    in_c = cfg.in_channels
    for i, spec in enumerate(cfg.convs):
        b.add(
            f"roinet.conv{i}.weight",
            rng.normal(0.0, scale, size=(spec.out_channels, in_c, spec.kernel, spec.kernel)).astype(np.float32),
        )
        b.add(f"roinet.conv{i}.bias", rng.normal(0.0, scale, size=spec.out_channels).astype(np.float32))
        in_c = spec.out_channels
    b.add("roinet.fc0.weight", rng.normal(0.0, scale, size=(cfg.fc_hidden, cfg.flat_features)).astype(np.float32))
    b.add("roinet.fc0.bias", rng.normal(0.0, scale, size=cfg.fc_hidden).astype(np.float32))
    b.add("roinet.fc1.weight", rng.normal(0.0, scale, size=(cfg.outputs, cfg.fc_hidden)).astype(np.float32))
    b.add("roinet.fc1.bias", rng.normal(0.0, scale, size=cfg.outputs).astype(np.float32))
    return b


def make_zero_roinet_bundle(cfg: RoiNetConfig) -> WeightBundle:
    b = WeightBundle()
    in_c = cfg.in_channels
    for i, spec in enumerate(cfg.convs):
        b.add(f"roinet.conv{i}.weight", np.zeros((spec.out_channels, in_c, spec.kernel, spec.kernel), np.float32))
        b.add(f"roinet.conv{i}.bias", np.zeros(spec.out_channels, np.float32))
        in_c = spec.out_channels
    b.add("roinet.fc0.weight", np.zeros((cfg.fc_hidden, cfg.flat_features), np.float32))
    b.add("roinet.fc0.bias", np.zeros(cfg.fc_hidden, np.float32))
    b.add("roinet.fc1.weight", np.zeros((cfg.outputs, cfg.fc_hidden), np.float32))
    b.add("roinet.fc1.bias", np.zeros(cfg.outputs, np.float32))
    return b


def write_default_fixtures(directory: str | Path) -> list[Path]:
    """Write the tiny ViT and small ROI-net fixture bundles."""
    from .weights import write_bundle

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    vit_path = directory / "vit_tiny.blwb"
    roi_path = directory / "roinet_small.blwb"
    write_bundle(make_vit_bundle(TINY_VIT, seed=7), vit_path)
    write_bundle(make_roinet_bundle(SMALL_ROINET, seed=11), roi_path)
    return [vit_path, roi_path]
