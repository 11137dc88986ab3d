"""Fixed-length measurement frames for the IED -> twin link.

Wire layout (19 bytes, little-endian)::

    0      1      2      3..5   6..9        10..17        18
    0x68   0x11   0x0D   IOA    value(f32)  timestamp ms  XOR(bytes 2..17)

Type 0x0D follows the IEC 104 "measured value, short float" type id.  The
checksum is a plain XOR and offers no protection against an on-path
adversary, who simply recomputes it (see :func:`tamper_stream`).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import reduce
from operator import xor
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import EncodingError, FramingError, IntegrityError, TruncationError

START = 0x68
LENGTH = 0x11
TYPE_SHORT_FLOAT = 0x0D
FRAME_SIZE = 19
MAX_IOA = (1 << 24) - 1

_BODY = struct.Struct("<fQ")

CHANNELS = ("p_pv", "q_pv", "p_batt", "q_batt", "p_w", "q_w", "p_n", "q_n")


class ChannelRegistry:
    """Bijective map between IOA numbers and channel names."""

    def __init__(self, names: Sequence[str] = CHANNELS, first_ioa: int = 1):
        if len(set(names)) != len(names):
            raise ValueError("channel names must be unique")
        self._by_name = {name: first_ioa + k for k, name in enumerate(names)}
        self._by_ioa = {ioa: name for name, ioa in self._by_name.items()}

    def ioa(self, name: str) -> int:
        return self._by_name[name]

    def name(self, ioa: int) -> str:
        return self._by_ioa[ioa]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._by_name)

    def __len__(self):
        return len(self._by_name)

    def __contains__(self, name):
        return name in self._by_name


REGISTRY = ChannelRegistry()


@dataclass(frozen=True)
class MeasurementFrame:
    channel: int
    value: float
    timestamp: int


def _checksum(body: bytes) -> int:
    return reduce(xor, body, 0)


def encode_frame(frame: MeasurementFrame) -> bytes:
    if not 0 < frame.channel <= MAX_IOA:
        raise EncodingError(f"IOA {frame.channel} outside 1..{MAX_IOA}")
    if not 0 <= frame.timestamp < (1 << 64):
        raise EncodingError(f"timestamp {frame.timestamp} does not fit in 64 bits")
    try:
        payload = bytes([TYPE_SHORT_FLOAT]) + frame.channel.to_bytes(3, "little") \
            + _BODY.pack(frame.value, frame.timestamp)
    except (struct.error, OverflowError) as exc:
        raise EncodingError(str(exc)) from None
    return bytes([START, LENGTH]) + payload + bytes([_checksum(payload)])


def decode_frame(data: bytes) -> MeasurementFrame:
    if len(data) < FRAME_SIZE:
        raise TruncationError(f"frame needs {FRAME_SIZE} bytes, got {len(data)}")
    if data[0] != START:
        raise FramingError(f"bad start byte 0x{data[0]:02X}")
    if data[1] != LENGTH:
        raise FramingError(f"bad length byte 0x{data[1]:02X}")
    if _checksum(data[2:18]) != data[18]:
        raise IntegrityError("checksum mismatch")
    if data[2] != TYPE_SHORT_FLOAT:
        raise FramingError(f"unsupported type id 0x{data[2]:02X}")
    ioa = int.from_bytes(data[3:6], "little")
    if ioa == 0:
        raise FramingError("IOA 0 is reserved")
    value, ts = _BODY.unpack(data[6:18])
    return MeasurementFrame(ioa, value, ts)


def iter_frames(data: bytes) -> Iterator[MeasurementFrame]:
    """Decode a stream of concatenated frames by fixed-length reads."""
    view = memoryview(data)
    for off in range(0, len(data), FRAME_SIZE):
        yield decode_frame(bytes(view[off:off + FRAME_SIZE]))


def encode_stream(frames: Iterable[MeasurementFrame]) -> bytes:
    return b"".join(encode_frame(f) for f in frames)


def decode_stream(data: bytes) -> list[MeasurementFrame]:
    return list(iter_frames(data))


def tamper_stream(data: bytes, transform: Callable[[MeasurementFrame], MeasurementFrame]) -> bytes:
    """Rewrite every frame through ``transform`` and re-encode with a fresh checksum."""
    return encode_stream(transform(f) for f in iter_frames(data))


def records_to_frames(t_ms: Sequence[int], values: np.ndarray,
                      registry: ChannelRegistry = REGISTRY) -> list[MeasurementFrame]:
    """One frame per (record, channel), channels in registry order."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != len(registry):
        raise EncodingError(f"expected {len(registry)} channel columns, got shape {values.shape}")
    ioas = [registry.ioa(n) for n in registry.names]
    return [MeasurementFrame(ioa, float(v), int(t))
            for t, row in zip(t_ms, values) for ioa, v in zip(ioas, row)]


def frames_to_records(frames: Iterable[MeasurementFrame],
                      registry: ChannelRegistry = REGISTRY) -> tuple[np.ndarray, np.ndarray]:
    """Group frames by timestamp into an (n, channels) matrix; missing cells are NaN."""
    rows: dict[int, np.ndarray] = {}
    col = {registry.ioa(n): k for k, n in enumerate(registry.names)}
    for f in frames:
        row = rows.setdefault(f.timestamp, np.full(len(registry), np.nan))
        row[col[f.channel]] = f.value
    t = np.array(sorted(rows), dtype=np.int64)
    return t, np.array([rows[k] for k in t]).reshape(len(t), len(registry))


def write_stream(path, frames: Iterable[MeasurementFrame]) -> None:
    with open(path, "wb") as fh:
        for f in frames:
            fh.write(encode_frame(f))


def read_stream(path) -> list[MeasurementFrame]:
    with open(path, "rb") as fh:
        return decode_stream(fh.read())
