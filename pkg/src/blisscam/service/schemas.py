"""Pydantic request/response models for the simulator service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class SceneSpec(BaseModel):
    width: int = 640
    height: int = 400
    pupil_radius: float = 26.0
    iris_radius: float = 60.0
    eye_radius: float = 160.0
    background_rate: float = 28_000.0
    sclera_rate: float = 40_000.0
    iris_rate: float = 19_000.0
    pupil_rate: float = 4_000.0
    amplitude_x: float = 70.0
    amplitude_y: float = 40.0
    cycles: float = 2.0


class VitConfigModel(BaseModel):
    patch_size: int = 16
    embed_dim: int = 192
    heads: int = 3
    encoder_blocks: int = 12
    decoder_blocks: int = 2
    class_count: int = 4
    mlp_ratio: int = 4
    max_grid_h: int = 25
    max_grid_w: int = 40


class ConvSpecModel(BaseModel):
    out_channels: int
    kernel: int = 3
    stride: int = 2


class RoiNetConfigModel(BaseModel):
    input_height: int = 400
    input_width: int = 640
    in_channels: int = 2
    convs: list[ConvSpecModel] = Field(
        default_factory=lambda: [
            ConvSpecModel(out_channels=8, kernel=3, stride=2),
            ConvSpecModel(out_channels=16, kernel=3, stride=4),
            ConvSpecModel(out_channels=32, kernel=3, stride=2),
        ]
    )
    fc_hidden: int = 64
    outputs: int = 4


class RunRequest(BaseModel):
    mode: Literal["NPU_FULL", "NPU_ROI", "S_NPU", "BLISSCAM"] = "BLISSCAM"
    fps: float = 120.0
    rate: float = Field(default=0.20, gt=0.0, le=1.0, description="in-ROI target sampling rate")
    sigma: int = 15
    seed: int = 0
    n_frames: int = Field(default=60, ge=2)
    roi_margin: int = 8
    calibration_cycles: int = 100
    scene: SceneSpec = Field(default_factory=SceneSpec)
    input_dir: Optional[str] = None
    coefficients_text: Optional[str] = None
    sensor_node_nm: int = 22
    host_node_nm: int = 7
    roi_weights_path: Optional[str] = None
    vit_weights_path: Optional[str] = None
    vit_config: Optional[VitConfigModel] = None


class RunResponse(BaseModel):
    summary: dict
    traces_csv: str
    energy_csv: str
    gaze_csv: str
    summary_csv: str


class SweepRequest(BaseModel):
    base: RunRequest = Field(default_factory=RunRequest)
    axis: Literal["fps", "rate", "node"]
    values: list[float]


class SweepResponse(BaseModel):
    rows: list[dict]
    summary_csv: str
    ok: bool


class RoiForwardRequest(BaseModel):
    bundle_b64: str
    events: list[list[int]]
    prev_seg_channel: Optional[list[list[float]]] = None
    config: RoiNetConfigModel = Field(default_factory=RoiNetConfigModel)


class RoiForwardResponse(BaseModel):
    outputs: list[float]
    roi: list[int]
    mac_count: int


class VitForwardRequest(BaseModel):
    bundle_b64: str
    grid: list[list[float]]
    validity: Optional[list[list[float]]] = None
    max_dn: float = 1023.0
    config: VitConfigModel = Field(default_factory=VitConfigModel)


class VitForwardResponse(BaseModel):
    logits: list[list[float]]
    labels: list[list[int]]
    grid_h: int
    grid_w: int


class HealthResponse(BaseModel):
    status: str
    version: str
