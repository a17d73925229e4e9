"""Stacked digital-pixel-sensor behavioral model: exposure and quantization.

Only photon shot noise is modeled (Poisson draw per pixel); comparator read
noise is assumed designed out and analog retention is lossless. Saturation
clips silently at the full well and is reported via a counter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError

DEFAULT_SIGMA_DN = 15  # event threshold, output-DN units at the 8-bit-equivalent scale


@dataclass(frozen=True)
class SensorConfig:
    width: int = 640
    height: int = 400
    exposure_time: float = 8.178e-3  # seconds; 1/120 s minus in-sensor overheads
    full_well: float = 10_000.0  # electrons
    adc_bits: int = 10
    fps: float = 120.0
    eventify_threshold: int = DEFAULT_SIGMA_DN

    def __post_init__(self) -> None:
        if self.adc_bits < 1:
            raise ConfigError("adc_bits must be >= 1")
        if self.exposure_time <= 0:
            raise ConfigError("exposure_time must be positive")
        if self.fps <= 0:
            raise ConfigError("fps must be positive")
        if self.exposure_time > 1.0 / self.fps + 1e-12:
            raise ConfigError(
                f"exposure_time {self.exposure_time} exceeds frame period {1.0 / self.fps}"
            )
        if self.full_well <= 0:
            raise ConfigError("full_well must be positive")

    @property
    def max_dn(self) -> int:
        return (1 << self.adc_bits) - 1


@dataclass
class AnalogFrame:
    electrons: np.ndarray  # (H, W) float, clipped to full well
    saturated: int  # number of pixels that hit the full well


@dataclass
class Frame:
    """Quantized frame in digital numbers."""

    dn: np.ndarray  # (H, W) uint16
    frame_index: int = 0
    timestamp: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.dn.shape


def expose(rates: np.ndarray, cfg: SensorConfig, seed: int) -> AnalogFrame:
    """Accumulate Poisson(rate * exposure) electrons per pixel, clip to full well."""
    rates = np.asarray(rates, dtype=np.float64)
    if np.any(rates < 0):
        raise ContractError("negative irradiance rate")
    rng = np.random.default_rng(seed)
    electrons = rng.poisson(rates * cfg.exposure_time).astype(np.float64)
    saturated = int(np.count_nonzero(electrons >= cfg.full_well))
    np.clip(electrons, 0.0, cfg.full_well, out=electrons)
    return AnalogFrame(electrons=electrons, saturated=saturated)


def quantize(frame: AnalogFrame, cfg: SensorConfig, frame_index: int = 0, timestamp: float = 0.0) -> Frame:
    """Linear ADC: DN = floor(electrons / full_well * max_dn), clamped."""
    dn = np.floor(frame.electrons / cfg.full_well * cfg.max_dn)
    dn = np.clip(dn, 0, cfg.max_dn).astype(np.uint16)
    return Frame(dn=dn, frame_index=frame_index, timestamp=timestamp)


def capture(rates: np.ndarray, cfg: SensorConfig, seed: int, frame_index: int = 0) -> Frame:
    """expose + quantize in one step."""
    return quantize(expose(rates, cfg, seed), cfg, frame_index=frame_index)
