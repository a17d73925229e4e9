"""FastAPI service wrapping the simulator core.

POST /run and /sweep execute simulations and return CSV payloads (the CLI
writes them to disk); the /forward endpoints expose raw network forward
passes so external weight producers can check parity against the simulator
through the wire format.
"""

from __future__ import annotations

import base64

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..energy import EnergyCoefficients
from ..errors import BlissError
from ..pipeline import VariantMode
from ..roi import ConvSpec, RoiNetConfig, mac_count, predict_roi_dnn, roinet_forward
from ..runner import RunSettings, execute_run, execute_sweep
from ..segment import VitConfig, vit_patch_logits
from ..weights import bundle_from_bytes
from ..events import EventMap
from .schemas import (
    HealthResponse,
    RoiForwardRequest,
    RoiForwardResponse,
    RunRequest,
    RunResponse,
    SweepRequest,
    SweepResponse,
    VitConfigModel,
    VitForwardRequest,
    VitForwardResponse,
)

app = FastAPI(title="blisscam", version=__version__)


def _settings(req: RunRequest) -> RunSettings:
    scene_kwargs = req.scene.model_dump()
    coeffs = (
        EnergyCoefficients.from_text(req.coefficients_text)
        if req.coefficients_text
        else EnergyCoefficients()
    )
    vit_cfg = _vit_config(req.vit_config) if req.vit_config else None
    return RunSettings(
        mode=VariantMode(req.mode),
        fps=req.fps,
        target_rate=req.rate,
        sigma=req.sigma,
        seed=req.seed,
        n_frames=req.n_frames,
        roi_margin=req.roi_margin,
        calibration_cycles=req.calibration_cycles,
        scene_kwargs=scene_kwargs,
        input_dir=req.input_dir,
        coefficients=coeffs,
        sensor_node_nm=req.sensor_node_nm,
        host_node_nm=req.host_node_nm,
        roi_weights_path=req.roi_weights_path,
        vit_weights_path=req.vit_weights_path,
        vit_cfg=vit_cfg,
    )


def _vit_config(model: VitConfigModel) -> VitConfig:
    return VitConfig(**model.model_dump())


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/run", response_model=RunResponse)
def run(req: RunRequest) -> RunResponse:
    try:
        art = execute_run(_settings(req))
    except BlissError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return RunResponse(
        summary=art.summary,
        traces_csv=art.traces_csv,
        energy_csv=art.energy_csv,
        gaze_csv=art.gaze_csv,
        summary_csv=art.summary_csv,
    )


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest) -> SweepResponse:
    try:
        art = execute_sweep(_settings(req.base), req.axis, req.values)
    except BlissError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return SweepResponse(rows=art.rows, summary_csv=art.summary_csv, ok=art.ok)


def _decode_bundle(b64: str):
    try:
        return bundle_from_bytes(base64.b64decode(b64))
    except BlissError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.post("/forward/roi", response_model=RoiForwardResponse)
def forward_roi(req: RoiForwardRequest) -> RoiForwardResponse:
    weights = _decode_bundle(req.bundle_b64)
    cfg = RoiNetConfig(
        input_height=req.config.input_height,
        input_width=req.config.input_width,
        in_channels=req.config.in_channels,
        convs=tuple(ConvSpec(c.out_channels, c.kernel, c.stride) for c in req.config.convs),
        fc_hidden=req.config.fc_hidden,
        outputs=req.config.outputs,
    )
    events = np.asarray(req.events, dtype=bool)
    prev = np.asarray(req.prev_seg_channel, dtype=np.float64) if req.prev_seg_channel else None
    try:
        x = np.zeros((cfg.in_channels, cfg.input_height, cfg.input_width))
        x[0, : events.shape[0], : events.shape[1]] = events
        if prev is not None and cfg.in_channels > 1:
            x[1, : prev.shape[0], : prev.shape[1]] = prev
        outputs = roinet_forward(x, weights, cfg)
        roi = predict_roi_dnn(EventMap(bits=events), prev, weights, cfg)
    except BlissError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return RoiForwardResponse(
        outputs=[float(v) for v in outputs],
        roi=[roi.x1, roi.y1, roi.x2, roi.y2],
        mac_count=mac_count(cfg),
    )


@app.post("/forward/vit", response_model=VitForwardResponse)
def forward_vit(req: VitForwardRequest) -> VitForwardResponse:
    weights = _decode_bundle(req.bundle_b64)
    cfg = _vit_config(req.config)
    grid = np.asarray(req.grid, dtype=np.float64)
    if req.validity is not None:
        validity = np.asarray(req.validity, dtype=np.float64)
    else:
        validity = (grid > 0).astype(np.float64)
    try:
        logits, gh, gw = vit_patch_logits(grid / req.max_dn, validity, weights, cfg)
    except BlissError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    labels = np.argmax(logits, axis=-1).reshape(gh, gw)
    return VitForwardResponse(
        logits=[[float(v) for v in row] for row in logits],
        labels=[[int(v) for v in row] for row in labels],
        grid_h=gh,
        grid_w=gw,
    )
