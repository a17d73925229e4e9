"""Inter-frame eventification: |curr - prev| > sigma, per pixel.

The hardware applies +sigma and -sigma as two sequential comparisons; a
single absolute-difference compare is bit-identical, so that is what we
compute. The threshold is strict (a difference of exactly sigma is not an
event). Sigma is stored in output-DN units; for bit depths other than the
8-bit scale it was tuned on, rescale by (2^bits - 1) / 255.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .sensor import Frame


@dataclass
class EventMap:
    bits: np.ndarray  # (H, W) bool
    frame_index: int = 0

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.bits))


def eventify(prev: Frame | np.ndarray, curr: Frame | np.ndarray, sigma: float) -> EventMap:
    prev_dn = prev.dn if isinstance(prev, Frame) else np.asarray(prev)
    curr_dn = curr.dn if isinstance(curr, Frame) else np.asarray(curr)
    if sigma < 0:
        raise ContractError("sigma must be >= 0")
    if prev_dn.shape != curr_dn.shape:
        raise ContractError(
            f"frame shapes differ: {prev_dn.shape} vs {curr_dn.shape}"
        )
    diff = np.abs(curr_dn.astype(np.int64) - prev_dn.astype(np.int64))
    index = curr.frame_index if isinstance(curr, Frame) else 0
    return EventMap(bits=diff > sigma, frame_index=index)


def pack_event_bits(events: EventMap) -> bytes:
    """Row-major, MSB-first 1-bit packing for debug dumps."""
    return np.packbits(events.bits, axis=None).tobytes()


def unpack_event_bits(data: bytes, width: int, height: int) -> EventMap:
    n = width * height
    if len(data) * 8 < n:
        raise ContractError(f"need {(n + 7) // 8} bytes for {width}x{height}, got {len(data)}")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=n).astype(bool)
    return EventMap(bits=bits.reshape(height, width))
