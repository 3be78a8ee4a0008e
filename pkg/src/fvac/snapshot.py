"""Binary field snapshots (``traj_<i>.snap``).

Layout, all little-endian::

    b"FVAC"  u16 version  u32 M  f64 L  f64 dt  u32 save_stride  u32 n_frames
    n_frames x [species 1: M complex64][species 2: M complex64]
    u32 CRC32 of everything above
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"FVAC"
VERSION = 1
_HEADER = struct.Struct("<4sHIddII")
_CRC = struct.Struct("<I")
_DTYPE = np.dtype("<c8")


class SnapshotError(ValueError):
    pass


@dataclass(eq=False)
class Snapshot:
    M: int
    L: float
    dt: float
    save_stride: int
    frames: np.ndarray  # (n_frames, 2, M) complex64
    version: int = VERSION

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) * (self.dt * self.save_stride)


def encode(snap: Snapshot) -> bytes:
    frames = np.ascontiguousarray(snap.frames, dtype=_DTYPE)
    if frames.ndim != 3 or frames.shape[1:] != (2, snap.M):
        raise SnapshotError(f"frames must be (n, 2, {snap.M}), got {frames.shape}")
    body = _HEADER.pack(MAGIC, snap.version, snap.M, snap.L, snap.dt, snap.save_stride, frames.shape[0])
    body += frames.tobytes()
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def decode(data: bytes) -> Snapshot:
    if len(data) < _HEADER.size + _CRC.size:
        raise SnapshotError("file too short for a snapshot header")
    magic, version, M, L, dt, stride, n_frames = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    expected = _HEADER.size + n_frames * 2 * M * _DTYPE.itemsize + _CRC.size
    if len(data) != expected:
        raise SnapshotError(f"size {len(data)} does not match header ({expected} bytes for {n_frames} frames)")
    (crc,) = _CRC.unpack_from(data, len(data) - _CRC.size)
    if zlib.crc32(data[: -_CRC.size]) & 0xFFFFFFFF != crc:
        raise SnapshotError("checksum mismatch")
    frames = np.frombuffer(data, dtype=_DTYPE, count=n_frames * 2 * M, offset=_HEADER.size)
    return Snapshot(M=M, L=L, dt=dt, save_stride=stride, frames=frames.reshape(n_frames, 2, M).copy(), version=version)


def write_snapshot(path, snap: Snapshot) -> None:
    Path(path).write_bytes(encode(snap))


def read_snapshot(path) -> Snapshot:
    return decode(Path(path).read_bytes())
