"""Binary field snapshots and restartable checkpoints.

Snapshot layout (all little-endian)::

    offset 0   4s   magic b"MHD2"
           4   u32  version (1)
           8   u32  n
          12   f64  box length L
          20   f64  time
          28   u32  field count m
          32   m * n * n f64, each field row-major (axis 0 = x1)

A checkpoint is a snapshot (fields u1, u2, b1, b2) followed by an integrator block::

           4s   magic b"MHDI"
           u32  block version (1)
           u32  metadata length k
           k    UTF-8 JSON metadata (step, dt, scheme, hashes, energy ledger)
           u32  spectral array count c
           c * n * (n//2+1) complex128, the exact half spectra the stepper advances

The physical payload is what other tools read; restarts use the spectral block so that
a resumed run is bit-identical to an uninterrupted one.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mhd2d.spectral import Grid

MAGIC = b"MHD2"
VERSION = 1
HEADER = struct.Struct("<4sIIddI")
BLOCK_MAGIC = b"MHDI"
BLOCK_VERSION = 1


class SnapshotError(ValueError):
    pass


@dataclass
class Snapshot:
    grid: Grid
    time: float
    fields: np.ndarray  # (m, n, n) float64
    meta: dict | None = None
    spectral: np.ndarray | None = None  # (c, n, nh) complex128


def encode_snapshot(grid: Grid, time: float, fields) -> bytes:
    arr = np.ascontiguousarray(np.asarray(fields, dtype="<f8"))
    if arr.ndim == 2:
        arr = arr[None]
    if arr.shape[1:] != (grid.n, grid.n):
        raise SnapshotError(f"fields must be (m, {grid.n}, {grid.n}), got {arr.shape}")
    head = HEADER.pack(MAGIC, VERSION, grid.n, grid.box_length, float(time), arr.shape[0])
    return head + arr.tobytes(order="C")


def encode_block(meta: dict, spectral: np.ndarray) -> bytes:
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    spec = np.ascontiguousarray(np.asarray(spectral, dtype="<c16"))
    return (
        BLOCK_MAGIC
        + struct.pack("<II", BLOCK_VERSION, len(blob))
        + blob
        + struct.pack("<I", spec.shape[0])
        + spec.tobytes(order="C")
    )


def decode(data: bytes) -> Snapshot:
    if len(data) < HEADER.size:
        raise SnapshotError("truncated snapshot header")
    magic, version, n, L, time, m = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    grid = Grid(n, L)
    off = HEADER.size
    size = m * n * n * 8
    if len(data) < off + size:
        raise SnapshotError("truncated field payload")
    fields = np.frombuffer(data, dtype="<f8", count=m * n * n, offset=off).reshape(m, n, n).astype(np.float64)
    off += size
    snap = Snapshot(grid, time, fields)
    if off == len(data):
        return snap
    if data[off : off + 4] != BLOCK_MAGIC:
        raise SnapshotError("trailing bytes are not an integrator block")
    bver, k = struct.unpack_from("<II", data, off + 4)
    if bver != BLOCK_VERSION:
        raise SnapshotError(f"unsupported integrator block version {bver}")
    off += 12
    snap.meta = json.loads(data[off : off + k].decode("utf-8"))
    off += k
    (c,) = struct.unpack_from("<I", data, off)
    off += 4
    nh = n // 2 + 1
    count = c * n * nh
    if len(data) < off + count * 16:
        raise SnapshotError("truncated spectral block")
    snap.spectral = np.frombuffer(data, dtype="<c16", count=count, offset=off).reshape(c, n, nh).astype(np.complex128)
    return snap


def write_snapshot(path, grid: Grid, time: float, fields) -> Path:
    path = Path(path)
    path.write_bytes(encode_snapshot(grid, time, fields))
    return path


def write_checkpoint(path, grid: Grid, time: float, fields, meta: dict, spectral) -> Path:
    path = Path(path)
    path.write_bytes(encode_snapshot(grid, time, fields) + encode_block(meta, spectral))
    return path


def read_snapshot(path) -> Snapshot:
    return decode(Path(path).read_bytes())


def write_state(path, state) -> Path:
    """Snapshot of an MHDState: fields u1, u2, b1, b2."""
    return write_snapshot(path, state.grid, state.time, state.physical())


def read_state(path):
    from mhd2d.state import MHDState

    snap = read_snapshot(path)
    if snap.fields.shape[0] != 4:
        raise SnapshotError(f"expected 4 fields (u1, u2, b1, b2), found {snap.fields.shape[0]}")
    if snap.spectral is not None:
        return MHDState.from_half(snap.grid, snap.spectral, snap.time)
    f = snap.fields
    return MHDState.from_physical(snap.grid, f[:2], f[2:], snap.time)
