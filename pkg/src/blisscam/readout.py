"""Sparse column-wise readout, run-length coding, and the MIPI transfer model.

Readout order follows the row/column decoders: all rows of the ROI are
enabled at once and columns x1..x2 are scanned sequentially, so the buffer
is column-major over the ROI (rows y1..y2 within each column). Unsampled
positions read 0. A sampled pixel that quantizes to 0 is floored to 1 so
that 0 unambiguously means "unsampled" in the stream; the 1-LSB photometric
error is negligible.

RLE wire format (also the on-disk dump format), all little-endian:

    magic        "BRLE"  4 bytes
    version      u16     = 1
    frame_index  u32
    x1 y1 x2 y2  u16 each (inclusive ROI corners)
    total_length u32     decoded buffer length
    records:     [literal_count u16][literals u16 ...][zero_run u16]

Counts are positive except a leading literal_count of 0 (buffer starts with
zeros), a trailing zero_run of 0 (buffer ends with literals), and the 0
fillers produced when a run longer than 65535 is split.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, CorruptStreamError, FormatError
from .roi import Roi
from .sampler import SampleMask
from .sensor import Frame

RLE_MAGIC = b"BRLE"
RLE_VERSION = 1
HEADER_BYTES = 22
MAX_RUN = 0xFFFF


@dataclass
class ReadoutBuffer:
    """Column-major 10-bit values over the ROI; zeros mark unsampled pixels.

    A zero-length buffer is the degenerate decode of an empty stream and is
    exempt from the ROI-area check (an inclusive-corner ROI is never empty).
    """

    values: np.ndarray  # (roi.area,) uint16
    roi: Roi
    frame_index: int = 0

    def __post_init__(self) -> None:
        if len(self.values) and self.values.shape != (self.roi.area,):
            raise ContractError(
                f"buffer length {self.values.shape} != ROI area {self.roi.area}"
            )

    def grid(self) -> np.ndarray:
        """Back to a (roi.height, roi.width) grid."""
        return self.values.reshape(self.roi.width, self.roi.height).T

    @property
    def sampled(self) -> int:
        return int(np.count_nonzero(self.values))


def sparse_readout(frame: Frame, roi: Roi, mask: SampleMask) -> ReadoutBuffer:
    if mask.roi != roi:
        raise ContractError(f"mask gated by {mask.roi}, readout asked for {roi}")
    if mask.bits.shape != frame.dn.shape:
        raise ContractError("mask and frame dimensions differ")
    outside = mask.bits.copy()
    outside[roi.y1 : roi.y2 + 1, roi.x1 : roi.x2 + 1] = False
    if outside.any():
        raise ContractError("mask has sampled pixels outside the ROI")
    crop = frame.dn[roi.y1 : roi.y2 + 1, roi.x1 : roi.x2 + 1]
    mcrop = mask.bits[roi.y1 : roi.y2 + 1, roi.x1 : roi.x2 + 1]
    vals = np.where(mcrop, np.maximum(crop, 1), 0).astype(np.uint16)
    return ReadoutBuffer(values=vals.T.reshape(-1), roi=roi, frame_index=frame.frame_index)


@dataclass
class RleStream:
    """Alternating literal/zero-run records plus the ROI header."""

    roi: Roi
    frame_index: int
    total_length: int
    records: list[tuple[np.ndarray, int]] = field(default_factory=list)
    # each record: (literal values uint16 array, zero run length)

    @property
    def byte_size(self) -> int:
        return HEADER_BYTES + sum(4 + 2 * len(lits) for lits, _ in self.records)

    def to_bytes(self) -> bytes:
        out = bytearray()
        out += RLE_MAGIC
        out += struct.pack(
            "<HIHHHHI",
            RLE_VERSION,
            self.frame_index,
            self.roi.x1,
            self.roi.y1,
            self.roi.x2,
            self.roi.y2,
            self.total_length,
        )
        for lits, zeros in self.records:
            out += struct.pack("<H", len(lits))
            out += lits.astype("<u2", copy=False).tobytes()
            out += struct.pack("<H", zeros)
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RleStream":
        if len(data) < HEADER_BYTES:
            raise CorruptStreamError("stream shorter than header")
        if data[:4] != RLE_MAGIC:
            raise FormatError(f"bad magic {data[:4]!r}, expected {RLE_MAGIC!r}")
        version, frame_index, x1, y1, x2, y2, total = struct.unpack_from("<HIHHHHI", data, 4)
        if version != RLE_VERSION:
            raise FormatError(f"unsupported stream version {version}")
        stream = cls(roi=Roi(x1, y1, x2, y2), frame_index=frame_index, total_length=total)
        pos = HEADER_BYTES
        decoded = 0
        while decoded < total:
            if pos + 2 > len(data):
                raise CorruptStreamError("truncated record header")
            (lit_count,) = struct.unpack_from("<H", data, pos)
            pos += 2
            if pos + 2 * lit_count + 2 > len(data):
                raise CorruptStreamError("truncated record body")
            lits = np.frombuffer(data, dtype="<u2", count=lit_count, offset=pos).copy()
            pos += 2 * lit_count
            (zeros,) = struct.unpack_from("<H", data, pos)
            pos += 2
            stream.records.append((lits, zeros))
            decoded += lit_count + zeros
        if decoded != total:
            raise CorruptStreamError(f"decoded length {decoded} != header length {total}")
        if pos != len(data):
            raise CorruptStreamError(f"{len(data) - pos} trailing bytes after records")
        return stream


def _chunked_runs(values: np.ndarray) -> list[tuple[bool, int, int]]:
    """Maximal runs of (is_literal, start, length), split at MAX_RUN."""
    n = len(values)
    if n == 0:
        return []
    nz = values != 0
    boundaries = np.flatnonzero(np.diff(nz)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [n]))
    chunks: list[tuple[bool, int, int]] = []
    for s, e in zip(starts, ends):
        is_lit = bool(nz[s])
        while e - s > MAX_RUN:
            chunks.append((is_lit, s, MAX_RUN))
            s += MAX_RUN
        chunks.append((is_lit, s, e - s))
    return chunks


def rle_encode(buffer: ReadoutBuffer) -> RleStream:
    values = buffer.values
    stream = RleStream(roi=buffer.roi, frame_index=buffer.frame_index, total_length=len(values))
    chunks = _chunked_runs(values)
    i = 0
    empty = np.empty(0, dtype=np.uint16)
    while i < len(chunks):
        is_lit, start, length = chunks[i]
        if not is_lit:
            stream.records.append((empty, length))
            i += 1
            continue
        lits = values[start : start + length]
        zeros = 0
        if i + 1 < len(chunks) and not chunks[i + 1][0]:
            _, zs, zl = chunks[i + 1]
            zeros = zl
            i += 1
        stream.records.append((lits, zeros))
        i += 1
    return stream


def rle_decode(stream: RleStream) -> ReadoutBuffer:
    parts: list[np.ndarray] = []
    decoded = 0
    for lits, zeros in stream.records:
        parts.append(np.asarray(lits, dtype=np.uint16))
        parts.append(np.zeros(zeros, dtype=np.uint16))
        decoded += len(lits) + zeros
    if decoded != stream.total_length:
        raise CorruptStreamError(
            f"records decode to {decoded} values, header says {stream.total_length}"
        )
    values = np.concatenate(parts) if parts else np.empty(0, dtype=np.uint16)
    if stream.total_length and stream.roi.area != stream.total_length:
        raise CorruptStreamError(
            f"header length {stream.total_length} != ROI area {stream.roi.area}"
        )
    return ReadoutBuffer(values=values, roi=stream.roi, frame_index=stream.frame_index)


@dataclass(frozen=True)
class MipiConfig:
    lanes: int = 2
    lane_rate: float = 1.25e9  # bits/second per lane
    energy_per_byte: float = 100e-12  # joules

    def __post_init__(self) -> None:
        if self.lanes < 1:
            raise ContractError("need at least one MIPI lane")
        if self.lane_rate <= 0:
            raise ContractError("lane_rate must be positive")


def mipi_transfer(n_bytes: int, cfg: MipiConfig) -> tuple[float, float]:
    """(latency seconds, energy joules) for moving n_bytes over the link."""
    if n_bytes < 0:
        raise ContractError("byte count must be >= 0")
    latency = n_bytes * 8.0 / (cfg.lanes * cfg.lane_rate)
    energy = n_bytes * cfg.energy_per_byte
    return latency, energy
