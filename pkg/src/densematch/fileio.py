"""File formats: Middlebury .flo, KITTI 16-bit PNGs, and 16-bit PGM.

All multi-byte integers in .flo are little-endian. KITTI flow PNGs
store (value * 64 + 2^15) in the R/G channels with validity in B;
disparity PNGs store value * 256 with 0 meaning invalid. Values on the
quantization grid round-trip exactly; out-of-range values raise rather
than clamp silently.
"""
from __future__ import annotations

import struct
from pathlib import Path

import cv2
import numpy as np

from .fields import MotionField

__all__ = [
    "read_flo",
    "write_flo",
    "read_flow_png",
    "write_flow_png",
    "read_disparity_png",
    "write_disparity_png",
    "read_pgm16",
    "write_pgm16",
]

FLO_TAG = b"PIEH"


def write_flo(path: str | Path, field: MotionField) -> None:
    """Write a flow field as Middlebury .flo (float32, (u, v) interleaved)."""
    if field.dim != 2:
        raise ValueError(".flo stores 2D flow; got a 1D field")
    data = field.vectors.astype("<f4")
    with open(path, "wb") as fh:
        fh.write(FLO_TAG)
        fh.write(struct.pack("<ii", field.width, field.height))
        fh.write(data.tobytes())


def read_flo(path: str | Path) -> MotionField:
    """Read a Middlebury .flo file; non-finite samples are marked invalid."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != FLO_TAG:
        raise ValueError(f"{path}: not a .flo file (bad magic)")
    w, h = struct.unpack("<ii", raw[4:12])
    if w <= 0 or h <= 0:
        raise ValueError(f"{path}: bad dimensions {w}x{h}")
    expect = 12 + 8 * w * h
    if len(raw) < expect:
        raise ValueError(f"{path}: truncated ({len(raw)} bytes, expected {expect})")
    vec = np.frombuffer(raw[12:expect], dtype="<f4").reshape(h, w, 2).astype(np.float64)
    return MotionField(vec, np.isfinite(vec).all(axis=2))


def write_flow_png(path: str | Path, field: MotionField) -> None:
    """Write a flow field as a KITTI-convention 16-bit PNG."""
    if field.dim != 2:
        raise ValueError("flow PNG stores 2D flow; got a 1D field")
    raw = field.vectors * 64.0 + 2.0**15
    raw_q = np.rint(raw)
    if ((raw_q < 0) | (raw_q > 65535))[field.valid].any():
        raise ValueError("flow values exceed the representable range [-512, ~512)")
    raw_q = np.clip(raw_q, 0, 65535).astype(np.uint16)
    valid = field.valid.astype(np.uint16)
    # cv2 writes BGR; the file's RGB must be (u, v, valid).
    bgr = np.stack([valid, raw_q[:, :, 1], raw_q[:, :, 0]], axis=2)
    if not cv2.imwrite(str(path), bgr):
        raise OSError(f"could not write {path}")


def read_flow_png(path: str | Path) -> MotionField:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise ValueError(f"{path}: unreadable image")
    if img.dtype != np.uint16:
        raise ValueError(f"{path}: flow PNG must be 16-bit, got {img.dtype}")
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"{path}: flow PNG must have 3 channels")
    valid = img[:, :, 0] > 0
    u = (img[:, :, 2].astype(np.float64) - 2.0**15) / 64.0
    v = (img[:, :, 1].astype(np.float64) - 2.0**15) / 64.0
    vec = np.stack([u, v], axis=2)
    vec[~valid] = 0.0
    return MotionField(vec, valid)


def write_disparity_png(path: str | Path, disparity: np.ndarray, valid: np.ndarray | None = None) -> None:
    """Write positive disparities as a KITTI-convention 16-bit PNG."""
    disparity = np.asarray(disparity, dtype=np.float64)
    if valid is None:
        valid = disparity > 0
    valid = np.asarray(valid, dtype=bool)
    raw = np.rint(disparity * 256.0)
    if ((raw < 1) | (raw > 65535))[valid].any():
        raise ValueError("valid disparities must quantize into [1/256, 256)")
    raw = np.where(valid, raw, 0).astype(np.uint16)
    if not cv2.imwrite(str(path), raw):
        raise OSError(f"could not write {path}")


def read_disparity_png(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a KITTI disparity PNG; returns (disparity, valid)."""
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise ValueError(f"{path}: unreadable image")
    if img.dtype != np.uint16:
        raise ValueError(f"{path}: disparity PNG must be 16-bit, got {img.dtype}")
    if img.ndim != 2:
        raise ValueError(f"{path}: disparity PNG must be single-channel")
    valid = img > 0
    return img.astype(np.float64) / 256.0, valid


def write_pgm16(path: str | Path, values: np.ndarray) -> None:
    """Write a [0, 1] map as a 16-bit binary PGM (maxval 65535)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("PGM expects a single-channel map")
    if ((values < 0) | (values > 1)).any():
        raise ValueError("PGM values must lie in [0, 1]")
    raw = np.rint(values * 65535.0).astype(">u2")
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(raw.tobytes())


def read_pgm16(path: str | Path) -> np.ndarray:
    """Read a 16-bit binary PGM back to a [0, 1] float map."""
    raw = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 65535:
        raise ValueError(f"{path}: expected 16-bit PGM, maxval {maxval}")
    data = np.frombuffer(raw[pos : pos + 2 * w * h], dtype=">u2")
    if data.size != w * h:
        raise ValueError(f"{path}: truncated PGM")
    return data.reshape(h, w).astype(np.float64) / 65535.0
