"""Behavioral simulator for an in-sensor sparse-sampling eye-tracking camera."""

__version__ = "0.1.0"

from .energy import EnergyCoefficients, EnergyReport, NodeScalingTable, account, compare_variants
from .errors import BlissError
from .events import EventMap, eventify
from .pipeline import (
    FrameTrace,
    PipelineConfig,
    PipelineTimings,
    VariantMode,
    run_pipeline,
    tracking_latency,
)
from .readout import MipiConfig, RleStream, mipi_transfer, rle_decode, rle_encode, sparse_readout
from .roi import Roi, RoiNetConfig, predict_roi_dnn, predict_roi_heuristic, validate_roi
from .sampler import CalibrationLut, SampleMask, SramBiasArray, calibrate, power_up, sample_gate
from .scene import EyeScene, FrameSequence, GroundTruth, generate_sequence, load_sequence
from .segment import GazeVector, SegMap, VitConfig, angular_error, predict_gaze, vit_forward
from .sensor import AnalogFrame, Frame, SensorConfig, expose, quantize
from .weights import WeightBundle, read_bundle, write_bundle

__all__ = [
    "AnalogFrame",
    "BlissError",
    "CalibrationLut",
    "EnergyCoefficients",
    "EnergyReport",
    "EventMap",
    "EyeScene",
    "Frame",
    "FrameSequence",
    "FrameTrace",
    "GazeVector",
    "GroundTruth",
    "MipiConfig",
    "NodeScalingTable",
    "PipelineConfig",
    "PipelineTimings",
    "RleStream",
    "Roi",
    "RoiNetConfig",
    "SampleMask",
    "SegMap",
    "SensorConfig",
    "SramBiasArray",
    "VariantMode",
    "VitConfig",
    "WeightBundle",
    "account",
    "angular_error",
    "calibrate",
    "compare_variants",
    "eventify",
    "expose",
    "generate_sequence",
    "load_sequence",
    "mipi_transfer",
    "power_up",
    "predict_gaze",
    "predict_roi_dnn",
    "predict_roi_heuristic",
    "quantize",
    "read_bundle",
    "rle_decode",
    "rle_encode",
    "run_pipeline",
    "sample_gate",
    "sparse_readout",
    "tracking_latency",
    "validate_roi",
    "vit_forward",
    "write_bundle",
]
