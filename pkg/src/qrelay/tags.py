"""Time-tag streams and their on-disk formats.

Binary dump layout (all little-endian)::

    b"QRTT"            magic
    u16                format version (1)
    32 bytes           SHA-256 digest of the serialized run config
    u64                number of records
    records            packed (u8 channel, u64 t_ps)

CSV export has the columns ``channel,t_ps``.
"""

from __future__ import annotations

import csv
import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qrelay.errors import DomainError

MAGIC = b"QRTT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sH32sQ")
_RECORD = np.dtype([("channel", "<u1"), ("t_ps", "<u8")])


class Channel(enum.IntEnum):
    D1 = 1  # Charlie, H port
    D2 = 2  # Charlie, V port
    D3 = 3  # Bob, first element of the analysis basis
    D4 = 4  # Bob, second element of the analysis basis


@dataclass(frozen=True)
class TimeTagStream:
    """Detector clicks ordered by time, ties broken by channel index."""

    channels: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        if self.channels.shape != self.times.shape:
            raise DomainError("channels and times must have equal length")

    @classmethod
    def from_unsorted(cls, channels, times) -> TimeTagStream:
        channels = np.asarray(channels, dtype=np.uint8)
        times = np.asarray(times, dtype=np.int64)
        if times.size and times.min() < 0:
            raise DomainError("time tags must be non-negative")
        order = np.lexsort((channels, times))
        return cls(channels[order], times[order])

    @classmethod
    def empty(cls) -> TimeTagStream:
        return cls(np.zeros(0, dtype=np.uint8), np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.times.size)

    def is_sorted(self) -> bool:
        if len(self) < 2:
            return True
        dt = np.diff(self.times)
        if np.any(dt < 0):
            return False
        ties = dt == 0
        return not np.any(self.channels[1:][ties] < self.channels[:-1][ties])

    def select(self, channel: int) -> np.ndarray:
        """Times of one channel, ascending."""
        return self.times[self.channels == channel]

    def counts(self) -> dict[Channel, int]:
        return {ch: int(np.count_nonzero(self.channels == ch)) for ch in Channel}

    def merge(self, *others: TimeTagStream) -> TimeTagStream:
        chans = np.concatenate([self.channels] + [o.channels for o in others])
        times = np.concatenate([self.times] + [o.times for o in others])
        return TimeTagStream.from_unsorted(chans, times)

    def equals(self, other: TimeTagStream) -> bool:
        return np.array_equal(self.channels, other.channels) and np.array_equal(self.times, other.times)


def write_binary(stream: TimeTagStream, path, config_hash: bytes = b"\0" * 32) -> None:
    if len(config_hash) != 32:
        raise DomainError("config hash must be a 32-byte SHA-256 digest")
    records = np.empty(len(stream), dtype=_RECORD)
    records["channel"] = stream.channels
    records["t_ps"] = stream.times.astype(np.uint64)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, config_hash, len(stream)))
        fh.write(records.tobytes())


def read_binary(path) -> tuple[TimeTagStream, bytes]:
    """Load a binary dump; returns the stream and the stored config hash."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DomainError("file too short for a tag dump header")
    magic, version, digest, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DomainError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DomainError(f"unsupported tag dump version {version}")
    body = data[_HEADER.size:]
    if len(body) != n * _RECORD.itemsize:
        raise DomainError("record section length does not match header count")
    records = np.frombuffer(body, dtype=_RECORD, count=n)
    stream = TimeTagStream(records["channel"].astype(np.uint8), records["t_ps"].astype(np.int64))
    if not stream.is_sorted():
        raise DomainError("tag dump is not sorted")
    return stream, digest


def write_csv(stream: TimeTagStream, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["channel", "t_ps"])
        w.writerows(zip(stream.channels.tolist(), stream.times.tolist()))


def read_csv(path) -> TimeTagStream:
    with open(path) as fh:
        lines = fh.read().splitlines()[1:]
    if not any(x.strip() for x in lines):
        return TimeTagStream.empty()
    arr = np.loadtxt(lines, delimiter=",", dtype=np.int64, ndmin=2)
    return TimeTagStream.from_unsorted(arr[:, 0], arr[:, 1])
