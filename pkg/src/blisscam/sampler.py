"""Pseudo-random in-ROI sampling from SRAM power-up metastability.

Each pixel owns ten SRAM cells; on every power-up event each cell latches to
1 with a fixed per-cell bias drawn once from Beta(alpha, beta) (process
variation, mean 0.5). The per-pixel popcount of the ten bits is compared
against a 4-bit threshold theta: the pixel is sampled when the popcount
strictly surpasses theta. A 16-entry lookup table, profiled offline over
many power-up cycles, maps a target sampling rate to theta; ties resolve to
the smaller theta (the higher rate, trading a little energy for accuracy).

The readout gate is the three-input AND of the sampling bit with the ROI
row and column enables.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError, FormatError
from .roi import Roi

CELLS_PER_PIXEL = 10
LUT_ENTRIES = 16

_POPCOUNT = np.array([bin(v).count("1") for v in range(1 << CELLS_PER_PIXEL)], dtype=np.uint8)


@dataclass(frozen=True)
class SramBiasArray:
    """Per-cell latch-to-1 probabilities, fixed for a sensor instance."""

    biases: np.ndarray  # (H, W, 10) in (0, 1)

    def __post_init__(self) -> None:
        if self.biases.ndim != 3 or self.biases.shape[2] != CELLS_PER_PIXEL:
            raise ConfigError(f"biases must be (H, W, {CELLS_PER_PIXEL})")
        if np.any(self.biases <= 0.0) or np.any(self.biases >= 1.0):
            raise ConfigError("biases must lie strictly in (0, 1)")
        self.biases.flags.writeable = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.biases.shape[:2]


def make_bias_array(
    width: int, height: int, seed: int, alpha: float = 8.0, beta: float = 8.0
) -> SramBiasArray:
    rng = np.random.default_rng(seed)
    b = rng.beta(alpha, beta, size=(height, width, CELLS_PER_PIXEL))
    np.clip(b, 1e-9, 1.0 - 1e-9, out=b)
    return SramBiasArray(biases=b)


def uniform_bias_array(width: int, height: int, p: float = 0.5) -> SramBiasArray:
    return SramBiasArray(biases=np.full((height, width, CELLS_PER_PIXEL), p))


def power_up(biases: SramBiasArray, seed: int) -> np.ndarray:
    """One power-up event: per-pixel 10-bit words (bit i = cell i), uint16."""
    rng = np.random.default_rng(seed)
    bits = rng.random(biases.biases.shape) < biases.biases
    weights = (1 << np.arange(CELLS_PER_PIXEL, dtype=np.uint16))
    return (bits * weights).sum(axis=2).astype(np.uint16)


def popcounts(words: np.ndarray) -> np.ndarray:
    return _POPCOUNT[words]


@dataclass(frozen=True)
class CalibrationLut:
    """rate(theta) = P(popcount > theta) for theta in 0..15."""

    rates: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.rates) != LUT_ENTRIES:
            raise ConfigError(f"LUT needs exactly {LUT_ENTRIES} entries")
        if any(a < b - 1e-12 for a, b in zip(self.rates, self.rates[1:])):
            raise ConfigError("LUT rates must be non-increasing in theta")

    def rate(self, theta: int) -> float:
        return self.rates[theta]

    def theta_for_rate(self, target: float) -> int:
        """theta minimizing |rate(theta) - target|; ties pick the smaller theta."""
        if not 0.0 <= target <= 1.0:
            raise ContractError("target rate must be in [0, 1]")
        best = 0
        best_err = abs(self.rates[0] - target)
        for theta in range(1, LUT_ENTRIES):
            err = abs(self.rates[theta] - target)
            if err < best_err - 1e-15:
                best, best_err = theta, err
        return best

    def to_text(self) -> str:
        return "".join(f"{t},{r:.9f}\n" for t, r in enumerate(self.rates))

    @classmethod
    def from_text(cls, text: str) -> "CalibrationLut":
        rates = []
        for lineno, line in enumerate(text.strip().splitlines()):
            parts = line.strip().split(",")
            if len(parts) != 2:
                raise FormatError(f"LUT line {lineno}: expected 'theta,rate'")
            theta, rate = int(parts[0]), float(parts[1])
            if theta != lineno:
                raise FormatError(f"LUT line {lineno}: theta {theta} out of order")
            rates.append(rate)
        return cls(rates=tuple(rates))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "CalibrationLut":
        return cls.from_text(Path(path).read_text())


def calibrate(biases: SramBiasArray, n_cycles: int, seed: int) -> CalibrationLut:
    """Profile popcount statistics over repeated power-ups into a LUT."""
    if n_cycles < 100:
        raise ContractError("need at least 100 calibration cycles")
    hist = np.zeros(CELLS_PER_PIXEL + 1, dtype=np.int64)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = ss.generate_state(n_cycles)
    for cycle_seed in seeds:
        counts = popcounts(power_up(biases, int(cycle_seed)))
        hist += np.bincount(counts.reshape(-1), minlength=CELLS_PER_PIXEL + 1)
    total = hist.sum()
    # P(popcount > theta): survival of the empirical histogram.
    survival = hist[::-1].cumsum()[::-1]
    rates = []
    for theta in range(LUT_ENTRIES):
        above = survival[theta + 1] if theta + 1 <= CELLS_PER_PIXEL else 0
        rates.append(float(above) / float(total))
    return CalibrationLut(rates=tuple(rates))


@dataclass
class SampleMask:
    bits: np.ndarray  # (H, W) bool, gated by the ROI
    roi: Roi
    target_rate: float | None = None

    @property
    def achieved_rate(self) -> float:
        """Fraction of in-ROI pixels sampled."""
        area = self.roi.area
        return float(np.count_nonzero(self.bits)) / area if area else 0.0

    @property
    def sampled(self) -> int:
        return int(np.count_nonzero(self.bits))


def sample_gate(
    words: np.ndarray, theta: int, roi: Roi, target_rate: float | None = None
) -> SampleMask:
    """Three-input AND: popcount(word) > theta, row enable, column enable."""
    if not 0 <= theta < LUT_ENTRIES:
        raise ContractError(f"theta must be a 4-bit value, got {theta}")
    h, w = words.shape
    random_bit = popcounts(words) > theta
    row_enable = np.zeros((h, 1), dtype=bool)
    row_enable[roi.y1 : roi.y2 + 1] = True
    col_enable = np.zeros((1, w), dtype=bool)
    col_enable[:, roi.x1 : roi.x2 + 1] = True
    return SampleMask(bits=random_bit & row_enable & col_enable, roi=roi, target_rate=target_rate)
