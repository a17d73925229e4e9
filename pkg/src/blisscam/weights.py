"""Binary weight-bundle reader/writer.

The bundle is the exchange format between the training harness (writer) and
the simulator (reader), so the byte layout is fixed:

    magic   "BLWB"          4 bytes
    version u32 LE          = 1
    count   u32 LE          number of tensors
    per tensor:
        name_len u16 LE
        name     UTF-8 bytes
        rank     u8
        dims     rank x u32 LE
        payload  prod(dims) x f32 LE, row-major

Tensors keep insertion order; names are unique.
"""

from __future__ import annotations

import struct
from collections import OrderedDict
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import WeightFormatError

MAGIC = b"BLWB"
VERSION = 1

_MAX_ELEMENTS = 1 << 31  # guards against corrupt dims blowing up allocation


class WeightBundle:
    """Ordered mapping of tensor name -> float32 ndarray."""

    def __init__(self) -> None:
        self._tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()

    def __len__(self) -> int:
        return len(self._tensors)

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._tensors[name]
        except KeyError:
            raise WeightFormatError(f"bundle has no tensor named {name!r}") from None

    def add(self, name: str, array: np.ndarray) -> None:
        if name in self._tensors:
            raise WeightFormatError(f"duplicate tensor name {name!r}")
        arr = np.ascontiguousarray(array, dtype=np.float32)
        self._tensors[name] = arr

    def items(self):
        return self._tensors.items()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightBundle):
            return NotImplemented
        if list(self._tensors) != list(other._tensors):
            return False
        return all(
            a.shape == b.shape and np.array_equal(a, b)
            for (_, a), (_, b) in zip(self.items(), other.items())
        )


def write_bundle(bundle: WeightBundle, path: str | Path) -> None:
    Path(path).write_bytes(bundle_to_bytes(bundle))


def read_bundle(path: str | Path) -> WeightBundle:
    return bundle_from_bytes(Path(path).read_bytes())


def bundle_to_bytes(bundle: WeightBundle) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<II", VERSION, len(bundle))
    for name, arr in bundle.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise WeightFormatError(f"tensor name too long: {name[:32]!r}...")
        out += struct.pack("<H", len(raw))
        out += raw
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.astype("<f4", copy=False).tobytes()
    return bytes(out)


def bundle_from_bytes(data: bytes) -> WeightBundle:
    if len(data) < 12:
        raise WeightFormatError("file too short for header")
    if data[:4] != MAGIC:
        raise WeightFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise WeightFormatError(f"unsupported version {version}")
    pos = 12
    bundle = WeightBundle()
    for i in range(count):
        try:
            (name_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            if len(data) < pos + name_len:
                raise struct.error("name truncated")
            name = data[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
        except (struct.error, UnicodeDecodeError) as exc:
            raise WeightFormatError(f"truncated tensor record #{i}: {exc}") from None
        n_elem = 1
        for d in dims:
            n_elem *= d
        if n_elem > _MAX_ELEMENTS:
            raise WeightFormatError(f"tensor {name!r}: dims {dims} overflow")
        payload = 4 * n_elem
        if len(data) < pos + payload:
            raise WeightFormatError(
                f"tensor {name!r}: payload truncated "
                f"(need {payload} bytes, have {len(data) - pos})"
            )
        arr = np.frombuffer(data, dtype="<f4", count=n_elem, offset=pos).reshape(dims)
        pos += payload
        if name in bundle:
            raise WeightFormatError(f"duplicate tensor name {name!r}")
        bundle.add(name, arr.copy())
    if pos != len(data):
        raise WeightFormatError(f"{len(data) - pos} trailing bytes after last tensor")
    return bundle
