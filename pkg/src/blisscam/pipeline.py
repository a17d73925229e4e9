"""Frame-overlapped pipeline: data path plus a deterministic scheduler.

The scheduler works on an integer nanosecond grid so that exposure starts
are exactly one frame period apart and stage bounds compare exactly.

Per-frame schedule for the in-sensor modes (BLISSCAM, S_NPU):

    exposure      [t*P, t*P + P - t_event - t_roi]   (window cut by in-sensor work)
    eventification[exp_end, +t_event]                 (absent on frame 0)
    roi_prediction[max(ev_end, feedback_end[t-1]), +t_roi]
    sampling      [roi_end, +t_sampling]
    readout       [sampling_end, +pixels_quantized * t_adc]
    mipi_out      [readout_end, +bytes_out / link rate]
    segmentation  [max(mipi_end, host free), +host_setup + linear model]
    mipi_feedback [seg_end, +bytes_feedback / link rate]   (parallel with gaze)
    gaze          [seg_end, +t_gaze]

NPU_FULL drops eventification/ROI/sampling and exposes for the full period;
NPU_ROI additionally runs ROI prediction on the host between MIPI and
segmentation. Frame t's ROI prediction waiting on frame t-1's feedback is
the cross-frame dependency; when it forces a delay the sampling window
shrinks and a stall is counted — exposure starts never move. A delay
exceeding one frame period means the stage graph cannot keep up and raises
SchedulingError naming the dependency.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NoPupilError, SchedulingError
from .events import EventMap, eventify
from .readout import MipiConfig, rle_decode, rle_encode, sparse_readout
from .roi import (
    Roi,
    RoiNetConfig,
    full_frame_roi,
    mac_count,
    predict_roi_dnn,
    predict_roi_heuristic,
    seg_feedback_channel,
)
from .sampler import CalibrationLut, calibrate, make_bias_array, power_up, sample_gate
from .scene import FrameSequence, GazeCalibration, GroundTruth
from .segment import (
    GazeVector,
    SegMap,
    VitConfig,
    angular_error,
    oracle_segment,
    predict_gaze,
    seg_feedback_bytes,
    vit_forward,
)
from .sensor import Frame, SensorConfig, capture
from .weights import WeightBundle


class VariantMode(enum.Enum):
    NPU_FULL = "NPU_FULL"
    NPU_ROI = "NPU_ROI"
    S_NPU = "S_NPU"
    BLISSCAM = "BLISSCAM"


IN_SENSOR_MODES = (VariantMode.S_NPU, VariantMode.BLISSCAM)

STAGES = (
    "exposure",
    "eventification",
    "roi_prediction",
    "sampling",
    "readout",
    "mipi_out",
    "segmentation",
    "gaze",
    "mipi_feedback",
)


@dataclass(frozen=True)
class PipelineTimings:
    fps: float = 120.0
    t_eventify: float = 5e-6
    t_roi_predict: float = 150e-6
    t_sampling: float = 5e-6
    adc_time_per_pixel: float = 0.15625e-9  # full 640x400 frame in 40 us
    host_setup_time: float = 160.2e-6  # per-frame weight/feature staging on the host
    host_macs_per_second: float = 1.024e12  # 32x32 MAC array at 1 GHz
    macs_per_pixel: float = 25_500.0  # segmentation cost per input pixel
    t_gaze: float = 50e-6
    mipi: MipiConfig = field(default_factory=MipiConfig)

    @property
    def period_ns(self) -> int:
        return round(1e9 / self.fps)

    def overhead_ns(self) -> int:
        return round(self.t_eventify * 1e9) + round(self.t_roi_predict * 1e9)


def segmentation_time_model(
    pixels: int, host_macs_per_second: float, macs_per_pixel: float
) -> float:
    """Host segmentation compute time, linear in the pixel count."""
    return pixels * macs_per_pixel / host_macs_per_second


@dataclass
class FrameWorkload:
    """Per-frame byte/pixel/MAC counts the scheduler and energy model consume."""

    frame_index: int
    frame_pixels: int
    roi: Roi
    pixels_quantized: int
    sampled_in_roi: int
    seg_pixels: int
    bytes_out: int
    bytes_feedback: int
    macs_in_sensor: int
    macs_on_host: int
    events: int = 0
    has_eventification: bool = True


@dataclass
class FrameTrace:
    frame_index: int
    stages: dict[str, tuple[int, int]]  # name -> (start_ns, end_ns)
    frame_pixels: int
    roi: Roi
    pixels_quantized: int
    sampled_in_roi: int
    seg_pixels: int
    bytes_out: int
    bytes_feedback: int
    macs_in_sensor: int
    macs_on_host: int
    events: int
    stalled_ns: int
    period_ns: int
    exposure_ns: int

    @property
    def bytes_transferred(self) -> int:
        return self.bytes_out + self.bytes_feedback

    @property
    def latency_ns(self) -> int:
        return self.stages["gaze"][1] - self.stages["exposure"][0]


def _mipi_ns(n_bytes: int, mipi: MipiConfig) -> int:
    return round(n_bytes * 8.0 / (mipi.lanes * mipi.lane_rate) * 1e9)


def exposure_window_ns(mode: VariantMode, timings: PipelineTimings) -> int:
    if mode in IN_SENSOR_MODES:
        return timings.period_ns - timings.overhead_ns()
    return timings.period_ns


def exposure_reduction(mode: VariantMode, timings: PipelineTimings) -> float:
    """Fraction of the nominal exposure ceded to in-sensor work."""
    return 1.0 - exposure_window_ns(mode, timings) / timings.period_ns


def schedule(
    mode: VariantMode, timings: PipelineTimings, workloads: list[FrameWorkload]
) -> list[FrameTrace]:
    """Assign stage times to per-frame workloads, honoring dependencies."""
    P = timings.period_ns
    t_event = round(timings.t_eventify * 1e9)
    t_roi = round(timings.t_roi_predict * 1e9)
    t_samp = round(timings.t_sampling * 1e9)
    t_gaze = round(timings.t_gaze * 1e9)
    t_setup = round(timings.host_setup_time * 1e9)
    exp_win = exposure_window_ns(mode, timings)
    if exp_win <= 0:
        raise SchedulingError(
            f"in-sensor overhead {timings.overhead_ns()} ns consumes the whole "
            f"{P} ns frame period; exposure window would be {exp_win} ns"
        )

    traces: list[FrameTrace] = []
    prev_feedback_end: int | None = None
    host_free = 0
    for w in workloads:
        t = w.frame_index
        stages: dict[str, tuple[int, int]] = {}
        exp_start = t * P
        exp_end = exp_start + exp_win
        stages["exposure"] = (exp_start, exp_end)
        stalled = 0

        t_read = round(w.pixels_quantized * timings.adc_time_per_pixel * 1e9)
        t_seg = t_setup + round(
            segmentation_time_model(
                w.seg_pixels, timings.host_macs_per_second, timings.macs_per_pixel
            )
            * 1e9
        )

        if mode in IN_SENSOR_MODES:
            cursor = exp_end
            if w.has_eventification:
                stages["eventification"] = (cursor, cursor + t_event)
                cursor += t_event
                if prev_feedback_end is not None and prev_feedback_end > cursor:
                    stalled = prev_feedback_end - cursor
                    if stalled > P:
                        raise SchedulingError(
                            f"frame {t}: roi_prediction start would be delayed "
                            f"{stalled} ns (> one period) waiting for "
                            f"end(mipi_feedback, {t - 1})"
                        )
                    cursor = prev_feedback_end
                stages["roi_prediction"] = (cursor, cursor + t_roi)
                cursor += t_roi
            stages["sampling"] = (cursor, cursor + t_samp)
            cursor += t_samp
            stages["readout"] = (cursor, cursor + t_read)
            cursor += t_read
            stages["mipi_out"] = (cursor, cursor + _mipi_ns(w.bytes_out, timings.mipi))
            cursor = stages["mipi_out"][1]
            seg_start = max(cursor, host_free)
            stalled += seg_start - cursor
            stages["segmentation"] = (seg_start, seg_start + t_seg)
            seg_end = stages["segmentation"][1]
            host_free = seg_end
            stages["mipi_feedback"] = (seg_end, seg_end + _mipi_ns(w.bytes_feedback, timings.mipi))
            prev_feedback_end = stages["mipi_feedback"][1]
            stages["gaze"] = (seg_end, seg_end + t_gaze)
        else:
            cursor = exp_end
            stages["readout"] = (cursor, cursor + t_read)
            cursor += t_read
            stages["mipi_out"] = (cursor, cursor + _mipi_ns(w.bytes_out, timings.mipi))
            cursor = stages["mipi_out"][1]
            host_start = max(cursor, host_free)
            stalled += host_start - cursor
            if mode is VariantMode.NPU_ROI and w.has_eventification:
                roi_macs = max(w.macs_on_host - round(w.seg_pixels * timings.macs_per_pixel), 0)
                t_roi_host = round(roi_macs / timings.host_macs_per_second * 1e9)
                stages["roi_prediction"] = (host_start, host_start + t_roi_host)
                host_start += t_roi_host
            stages["segmentation"] = (host_start, host_start + t_seg)
            seg_end = stages["segmentation"][1]
            host_free = seg_end
            stages["gaze"] = (seg_end, seg_end + t_gaze)

        traces.append(
            FrameTrace(
                frame_index=t,
                stages=stages,
                frame_pixels=w.frame_pixels,
                roi=w.roi,
                pixels_quantized=w.pixels_quantized,
                sampled_in_roi=w.sampled_in_roi,
                seg_pixels=w.seg_pixels,
                bytes_out=w.bytes_out,
                bytes_feedback=w.bytes_feedback,
                macs_in_sensor=w.macs_in_sensor,
                macs_on_host=w.macs_on_host,
                events=w.events,
                stalled_ns=stalled,
                period_ns=P,
                exposure_ns=exp_win,
            )
        )
    return traces


def tracking_latency(traces: list[FrameTrace]) -> tuple[float, float]:
    """(mean, max) seconds from exposure start to gaze end."""
    lat = np.array([t.latency_ns for t in traces], dtype=np.float64) * 1e-9
    return float(lat.mean()), float(lat.max())


@dataclass
class PipelineConfig:
    mode: VariantMode = VariantMode.BLISSCAM
    timings: PipelineTimings = field(default_factory=PipelineTimings)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    roinet: RoiNetConfig = field(default_factory=RoiNetConfig)
    target_rate: float = 0.20
    roi_margin: int = 8
    seed: int = 0
    calibration_cycles: int = 100
    bias_alpha: float = 8.0
    bias_beta: float = 8.0
    raw_bytes_per_pixel: int = 2  # 10-bit values in 16-bit slots
    min_pupil_pixels: int = 10

    def __post_init__(self) -> None:
        if not 0.0 < self.target_rate <= 1.0:
            raise ConfigError("target_rate must be in (0, 1]")


@dataclass
class PipelineResult:
    mode: VariantMode
    traces: list[FrameTrace]
    segs: list[SegMap]
    gazes: list[GazeVector]
    lut: CalibrationLut | None
    theta: int | None
    stall_count: int
    no_pupil_count: int
    achieved_rates: list[float]
    gaze_errors: np.ndarray | None  # (T, 2) |pred - truth| (vertical, horizontal)

    @property
    def total_sampled(self) -> int:
        return sum(t.sampled_in_roi for t in self.traces)

    @property
    def total_pixels(self) -> int:
        return sum(t.frame_pixels for t in self.traces)

    def pixel_reduction(self) -> float:
        """Frame pixels over retained pixels (the data-reduction headline)."""
        s = self.total_sampled
        return self.total_pixels / s if s else float("inf")

    def retention(self) -> float:
        return self.total_sampled / self.total_pixels


def run_pipeline(
    seq: FrameSequence,
    truth: GroundTruth | None,
    cfg: PipelineConfig,
    calibration: GazeCalibration,
    roi_weights: WeightBundle | None = None,
    vit_weights: WeightBundle | None = None,
    vit_cfg: VitConfig | None = None,
) -> PipelineResult:
    """Execute the full data path and schedule it.

    With `vit_weights` unset, segmentation uses the ground-truth oracle
    (requires `truth`); with `roi_weights` unset, ROI prediction uses the
    bounding-box heuristic. Either way the in-sensor NPU is charged the
    configured DNN budget, since the heuristic stands in for the learned
    predictor.
    """
    n_frames = len(seq)
    if n_frames < 2:
        raise ConfigError("need at least 2 frames")
    if vit_weights is None and truth is None:
        raise ConfigError("oracle segmentation needs ground truth")
    mode = cfg.mode
    h, w = seq.height, seq.width
    n_pixels = h * w

    exp_s = exposure_window_ns(mode, cfg.timings) * 1e-9
    sensor = replace(cfg.sensor, width=w, height=h, exposure_time=exp_s, fps=cfg.timings.fps)
    sigma = sensor.eventify_threshold

    root = np.random.SeedSequence(cfg.seed)
    expose_seeds, power_seeds, bias_seed, calib_seed = root.spawn(4)
    expose_children = expose_seeds.spawn(n_frames)
    power_children = power_seeds.spawn(n_frames)

    lut = None
    theta = None
    biases = None
    samples_roi = mode in IN_SENSOR_MODES
    if samples_roi:
        biases = make_bias_array(w, h, bias_seed, alpha=cfg.bias_alpha, beta=cfg.bias_beta)
        lut = calibrate(biases, cfg.calibration_cycles, calib_seed)
        theta = lut.theta_for_rate(cfg.target_rate)

    roinet_macs = mac_count(cfg.roinet)
    workloads: list[FrameWorkload] = []
    segs: list[SegMap] = []
    gazes: list[GazeVector] = []
    achieved: list[float] = []
    no_pupil = 0

    prev_frame: Frame | None = None
    prev_roi: Roi | None = None
    prev_seg: SegMap | None = None
    prev_gaze: GazeVector | None = None

    for t in range(n_frames):
        frame = capture(seq.frames[t], sensor, expose_children[t], frame_index=t)
        events: EventMap | None = None
        if mode is not VariantMode.NPU_FULL and t > 0:
            events = eventify(prev_frame, frame, sigma)

        if mode is VariantMode.NPU_FULL or t == 0:
            roi = full_frame_roi(w, h)
        elif roi_weights is not None:
            channel = seg_feedback_channel(
                prev_seg.labels if prev_seg else None,
                prev_seg.roi if prev_seg else None,
                h,
                w,
            )
            roi = predict_roi_dnn(events, channel, roi_weights, cfg.roinet)
        else:
            roi = predict_roi_heuristic(events, prev_roi, cfg.roi_margin)

        if samples_roi:
            words = power_up(biases, power_children[t])
            mask = sample_gate(words, theta, roi, target_rate=cfg.target_rate)
            buffer = sparse_readout(frame, roi, mask)
            stream = rle_encode(buffer)
            bytes_out = stream.byte_size
            host_buffer = rle_decode(stream)
            sampled = mask.sampled
            achieved.append(mask.achieved_rate)
            grid = host_buffer.grid()
            validity = None  # zero means unsampled in the decoded buffer
        else:
            sampled = roi.area
            bytes_out = n_pixels * cfg.raw_bytes_per_pixel
            grid = frame.dn[roi.y1 : roi.y2 + 1, roi.x1 : roi.x2 + 1]
            achieved.append(1.0)
            validity = np.ones(grid.shape, dtype=np.float64)  # dense: zeros are real

        if vit_weights is not None:
            seg = vit_forward(
                grid, vit_weights, vit_cfg or VitConfig(), roi=roi, frame_index=t,
                max_dn=sensor.max_dn, validity=validity,
            )
        else:
            seg = oracle_segment(truth, t, roi)

        try:
            gaze = predict_gaze(seg, calibration, cfg.min_pupil_pixels)
        except NoPupilError:
            no_pupil += 1
            gaze = prev_gaze if prev_gaze is not None else GazeVector(0.0, 0.0)
        segs.append(seg)
        gazes.append(gaze)

        seg_pixels = n_pixels if mode is VariantMode.NPU_FULL else roi.area
        macs_host = round(seg_pixels * cfg.timings.macs_per_pixel)
        if mode is VariantMode.NPU_ROI and t > 0:
            macs_host += roinet_macs
        workloads.append(
            FrameWorkload(
                frame_index=t,
                frame_pixels=n_pixels,
                roi=roi,
                pixels_quantized=sampled if mode is VariantMode.BLISSCAM else n_pixels,
                sampled_in_roi=sampled,
                seg_pixels=seg_pixels,
                bytes_out=bytes_out,
                bytes_feedback=seg_feedback_bytes(roi.area) if samples_roi else 0,
                macs_in_sensor=roinet_macs if samples_roi else 0,
                macs_on_host=macs_host,
                events=events.count if events is not None else 0,
                has_eventification=t > 0 and mode is not VariantMode.NPU_FULL,
            )
        )

        prev_frame, prev_roi, prev_seg, prev_gaze = frame, roi, seg, gaze

    traces = schedule(mode, cfg.timings, workloads)
    stall_count = sum(1 for tr in traces if tr.stalled_ns > 0)

    errors = None
    if truth is not None:
        errors = np.array(
            [
                angular_error(g, GazeVector(truth.gaze_angles[t][0], truth.gaze_angles[t][1]))
                for t, g in enumerate(gazes)
            ]
        )
    return PipelineResult(
        mode=mode,
        traces=traces,
        segs=segs,
        gazes=gazes,
        lut=lut,
        theta=theta,
        stall_count=stall_count,
        no_pupil_count=no_pupil,
        achieved_rates=achieved,
        gaze_errors=errors,
    )


def roi_size_stats(traces: list[FrameTrace]) -> tuple[float, float]:
    areas = np.array([t.roi.area for t in traces], dtype=np.float64)
    return float(areas.mean()), float(areas.std())
