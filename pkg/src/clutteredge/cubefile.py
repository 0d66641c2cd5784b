"""Binary data-cube format for multi-block range profiles.

Layout (all little-endian)::

    magic     4 bytes   b"CEDC"
    version   u16       1
    N         u16       channels
    K         u32       range bins
    blocks    u32
    precision u8        32 or 64 (bits per real component)
    payload   blocks x K x N complex values as interleaved (re, im) floats,
              bin-by-bin within each block

In memory the cube is ``(blocks, N, K)`` complex.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"CEDC"
VERSION = 1
HEADER = struct.Struct("<4sHHIIB")


def _dtype(precision: int) -> np.dtype:
    if precision == 32:
        return np.dtype("<f4")
    if precision == 64:
        return np.dtype("<f8")
    raise DataError(f"precision must be 32 or 64, got {precision}")


def encode_cube(cube: np.ndarray, precision: int = 64) -> bytes:
    cube = np.asarray(cube)
    if cube.ndim == 2:
        cube = cube[None]
    B, N, K = cube.shape
    dt = _dtype(precision)
    body = cube.transpose(0, 2, 1)
    inter = np.stack([body.real, body.imag], axis=-1).astype(dt)
    return HEADER.pack(MAGIC, VERSION, N, K, B, precision) + inter.tobytes()


def decode_cube(blob: bytes) -> np.ndarray:
    if len(blob) < HEADER.size:
        raise DataError("file too short for a cube header")
    magic, version, N, K, B, precision = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DataError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise DataError(f"unsupported cube version {version}")
    dt = _dtype(precision)
    expected = B * K * N * 2 * dt.itemsize
    payload = blob[HEADER.size:]
    if len(payload) != expected:
        raise DataError(f"payload is {len(payload)} bytes, header implies {expected}")
    arr = np.frombuffer(payload, dtype=dt).astype(float).reshape(B, K, N, 2)
    return (arr[..., 0] + 1j * arr[..., 1]).transpose(0, 2, 1).copy()


def write_cube(path, cube: np.ndarray, precision: int = 64) -> None:
    Path(path).write_bytes(encode_cube(cube, precision))


def read_cube(path) -> np.ndarray:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read cube {path}: {exc}") from exc
    return decode_cube(blob)


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read(HEADER.size)
    if len(raw) < HEADER.size:
        raise DataError("file too short for a cube header")
    magic, version, N, K, B, precision = HEADER.unpack(raw)
    return {"magic": magic, "version": version, "N": N, "K": K, "blocks": B, "precision": precision}
