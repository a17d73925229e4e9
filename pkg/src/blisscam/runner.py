"""Experiment runner: single runs and sweeps with CSV outputs.

Every CSV starts with the comment line `# blisscam-csv schema=1` followed by
a header row; parsers should skip `#` lines. Outputs are byte-deterministic
for a fixed request (fixed-precision float formatting, no wall-clock data).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .energy import (
    COMPONENTS,
    DEFAULT_NODES,
    EnergyCoefficients,
    EnergyReport,
    account,
)
from .errors import BlissError, ConfigError
from .pipeline import (
    PipelineConfig,
    PipelineResult,
    PipelineTimings,
    VariantMode,
    exposure_reduction,
    roi_size_stats,
    run_pipeline,
    tracking_latency,
)
from .roi import RoiNetConfig
from .scene import (
    EyeScene,
    FrameSequence,
    GazeCalibration,
    GroundTruth,
    generate_sequence,
    load_sequence,
    make_default_scene,
)
from .segment import VitConfig
from .sensor import SensorConfig
from .weights import read_bundle

SCHEMA_LINE = "# blisscam-csv schema=1"

SUMMARY_COLUMNS = (
    "mode",
    "fps",
    "n_frames",
    "seed",
    "sigma",
    "target_rate",
    "theta",
    "lut_rate",
    "achieved_rate",
    "exposure_us",
    "exposure_reduction_pct",
    "mean_latency_ms",
    "max_latency_ms",
    "achieved_fps",
    "stalls",
    "no_pupil_frames",
    "retention_pct",
    "pixel_reduction",
    "byte_compression",
    "roi_area_mean",
    "roi_area_std",
    "mean_err_vertical_deg",
    "mean_err_horizontal_deg",
    "total_energy_uj",
    "sensor_energy_uj",
    "readout_share_pct",
    "feedback_share_pct",
    "sensor_npu_uj",
    "status",
)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def _csv(header: list[str], rows: list[list]) -> str:
    lines = [SCHEMA_LINE, ",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


@dataclass
class RunSettings:
    """Fully resolved inputs for one simulation run."""

    mode: VariantMode = VariantMode.BLISSCAM
    fps: float = 120.0
    target_rate: float = 0.20
    sigma: int = 15
    seed: int = 0
    n_frames: int = 60
    roi_margin: int = 8
    calibration_cycles: int = 100
    scene_kwargs: dict = field(default_factory=dict)
    input_dir: str | None = None
    recorded_full_scale_rate: float = 42_000.0  # e-/s mapped to gray 255
    coefficients: EnergyCoefficients = field(default_factory=EnergyCoefficients)
    sensor_node_nm: int = 22
    host_node_nm: int = 7
    roi_weights_path: str | None = None
    vit_weights_path: str | None = None
    vit_cfg: VitConfig | None = None


@dataclass
class RunArtifacts:
    summary: dict
    traces_csv: str
    energy_csv: str
    gaze_csv: str
    summary_csv: str
    result: PipelineResult
    report: EnergyReport


def _load_inputs(settings: RunSettings) -> tuple[FrameSequence, GroundTruth | None, EyeScene | None]:
    if settings.input_dir is not None:
        recorded = load_sequence(settings.input_dir)
        rates = recorded.frames.astype(np.float64) / 255.0 * settings.recorded_full_scale_rate
        if len(recorded) < settings.n_frames:
            raise ConfigError(
                f"input dir has {len(recorded)} frames, need {settings.n_frames}"
            )
        return FrameSequence(rates[: settings.n_frames]), None, None
    kwargs = dict(settings.scene_kwargs)
    kwargs.setdefault("n_frames", settings.n_frames)
    kwargs.setdefault("seed", settings.seed)
    scene = make_default_scene(**kwargs)
    seq, truth = generate_sequence(scene, settings.n_frames, settings.seed)
    return seq, truth, scene


def execute_run(settings: RunSettings) -> RunArtifacts:
    seq, truth, scene = _load_inputs(settings)
    timings = PipelineTimings(fps=settings.fps)
    sensor = SensorConfig(
        width=seq.width,
        height=seq.height,
        exposure_time=min(8.178e-3, 0.98 / settings.fps),
        fps=settings.fps,
        eventify_threshold=settings.sigma,
    )
    roinet = RoiNetConfig(input_height=seq.height, input_width=seq.width)
    pipe_cfg = PipelineConfig(
        mode=settings.mode,
        timings=timings,
        sensor=sensor,
        roinet=roinet,
        target_rate=settings.target_rate,
        roi_margin=settings.roi_margin,
        seed=settings.seed,
        calibration_cycles=settings.calibration_cycles,
    )
    roi_weights = read_bundle(settings.roi_weights_path) if settings.roi_weights_path else None
    vit_weights = read_bundle(settings.vit_weights_path) if settings.vit_weights_path else None
    if scene is not None:
        calibration = scene.calibration
    else:
        calibration = GazeCalibration(center_x=(seq.width - 1) / 2, center_y=(seq.height - 1) / 2)
    result = run_pipeline(
        seq, truth, pipe_cfg, calibration, roi_weights, vit_weights, settings.vit_cfg
    )
    report = account(
        result.traces,
        settings.mode,
        settings.coefficients,
        DEFAULT_NODES,
        settings.sensor_node_nm,
        settings.host_node_nm,
    )
    return _artifacts(settings, result, report)


def _artifacts(settings: RunSettings, result: PipelineResult, report: EnergyReport) -> RunArtifacts:
    traces_rows = []
    for tr in result.traces:
        for stage, (start, end) in tr.stages.items():
            traces_rows.append([tr.frame_index, stage, start / 1000.0, end / 1000.0])
    traces_csv = _csv(["frame", "stage", "start_us", "end_us"], traces_rows)

    energy_rows = []
    for i, row in enumerate(report.per_frame):
        energy_rows.append([i] + [row[c] * 1e6 for c in COMPONENTS])
    energy_rows.append(["total"] + [report.components[c] * 1e6 for c in COMPONENTS])
    energy_csv = _csv(["frame"] + [f"{c}_uj" for c in COMPONENTS], energy_rows)

    gaze_rows = []
    for t, gaze in enumerate(result.gazes):
        if result.gaze_errors is not None:
            err_v, err_h = result.gaze_errors[t]
        else:
            err_v = err_h = float("nan")
        gaze_rows.append([t, gaze.vertical, gaze.horizontal, err_v, err_h])
    gaze_csv = _csv(
        ["frame", "pred_vertical_deg", "pred_horizontal_deg", "err_vertical_deg", "err_horizontal_deg"],
        gaze_rows,
    )

    summary = summarize(settings, result, report)
    summary_csv = _csv(list(SUMMARY_COLUMNS), [[summary[c] for c in SUMMARY_COLUMNS]])
    return RunArtifacts(
        summary=summary,
        traces_csv=traces_csv,
        energy_csv=energy_csv,
        gaze_csv=gaze_csv,
        summary_csv=summary_csv,
        result=result,
        report=report,
    )


def summarize(settings: RunSettings, result: PipelineResult, report: EnergyReport) -> dict:
    mean_lat, max_lat = tracking_latency(result.traces)
    gaze_ends = np.array([tr.stages["gaze"][1] for tr in result.traces], dtype=np.int64)
    # steady-state output rate: skip the frame-0 bootstrap; per-frame jitter
    # (host time tracks ROI size) telescopes away over the window
    if len(gaze_ends) > 2:
        achieved_fps = (len(gaze_ends) - 2) * 1e9 / float(gaze_ends[-1] - gaze_ends[1])
    else:
        achieved_fps = float("nan")
    roi_mean, roi_std = roi_size_stats(result.traces)
    raw_bytes = result.traces[0].frame_pixels * 2
    mean_bytes_out = float(np.mean([tr.bytes_out for tr in result.traces]))
    if result.gaze_errors is not None:
        err_v = float(result.gaze_errors[:, 0].mean())
        err_h = float(result.gaze_errors[:, 1].mean())
    else:
        err_v = err_h = float("nan")
    timings = PipelineTimings(fps=settings.fps)
    total = report.total
    return {
        "mode": settings.mode.value,
        "fps": settings.fps,
        "n_frames": len(result.traces),
        "seed": settings.seed,
        "sigma": settings.sigma,
        "target_rate": settings.target_rate,
        "theta": result.theta if result.theta is not None else -1,
        "lut_rate": result.lut.rate(result.theta) if result.lut is not None else float("nan"),
        "achieved_rate": float(np.mean(result.achieved_rates)),
        "exposure_us": result.traces[0].exposure_ns / 1000.0,
        "exposure_reduction_pct": 100.0 * exposure_reduction(settings.mode, timings),
        "mean_latency_ms": mean_lat * 1e3,
        "max_latency_ms": max_lat * 1e3,
        "achieved_fps": achieved_fps,
        "stalls": result.stall_count,
        "no_pupil_frames": result.no_pupil_count,
        "retention_pct": 100.0 * result.retention(),
        "pixel_reduction": result.pixel_reduction(),
        "byte_compression": raw_bytes / mean_bytes_out,
        "roi_area_mean": roi_mean,
        "roi_area_std": roi_std,
        "mean_err_vertical_deg": err_v,
        "mean_err_horizontal_deg": err_h,
        "total_energy_uj": total * 1e6 / max(len(result.traces), 1),
        "sensor_energy_uj": report.sensor_side() * 1e6 / max(len(result.traces), 1),
        "readout_share_pct": 100.0 * report.components["readout"] / report.sensor_side(),
        "feedback_share_pct": 100.0 * report.components["feedback"] / total,
        "sensor_npu_uj": report.components["sensor_npu"] * 1e6 / max(len(result.traces), 1),
        "status": "ok",
    }


SWEEP_AXES = ("fps", "rate", "node")


def _apply_axis(settings: RunSettings, axis: str, value: float) -> RunSettings:
    if axis == "fps":
        return replace(settings, fps=float(value))
    if axis == "rate":
        rate = float(value)
        if rate > 1.0:
            rate /= 100.0  # values given in percent
        return replace(settings, target_rate=rate)
    if axis == "node":
        return replace(settings, sensor_node_nm=int(value))
    raise ConfigError(f"unknown sweep axis {axis!r} (choose from {SWEEP_AXES})")


def max_workers() -> int:
    env = os.environ.get("BLISS_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"BLISS_THREADS: bad value {env!r}") from None
        if n < 1:
            raise ConfigError("BLISS_THREADS must be >= 1")
        return n
    return min(os.cpu_count() or 1, 8)


@dataclass
class SweepArtifacts:
    rows: list[dict]
    summary_csv: str
    ok: bool


def execute_sweep(settings: RunSettings, axis: str, values: list[float]) -> SweepArtifacts:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r} (choose from {SWEEP_AXES})")

    def one(value: float) -> dict:
        try:
            art = execute_run(_apply_axis(settings, axis, value))
            row = dict(art.summary)
        except BlissError as exc:
            row = {c: float("nan") for c in SUMMARY_COLUMNS}
            row["mode"] = settings.mode.value
            row["status"] = f"error: {exc}"
        row["axis"] = axis
        row["value"] = value
        return row

    if values:
        with ThreadPoolExecutor(max_workers=max_workers()) as pool:
            rows = list(pool.map(one, values))
    else:
        rows = []
    header = ["axis", "value"] + list(SUMMARY_COLUMNS)
    csv = _csv(header, [[r[c] for c in header] for r in rows])
    ok = all(str(r["status"]) == "ok" for r in rows)
    return SweepArtifacts(rows=rows, summary_csv=csv, ok=ok)


def write_run_artifacts(art: RunArtifacts, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "traces.csv").write_text(art.traces_csv)
    (out / "energy.csv").write_text(art.energy_csv)
    (out / "gaze.csv").write_text(art.gaze_csv)
    (out / "summary.csv").write_text(art.summary_csv)
