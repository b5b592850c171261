"""Dense tensor helpers and the ``.ften`` binary format.

Videos are ``(F, H, W, C)`` arrays and features are ``(frames, sites, channels)``
arrays, both row-major and frame-first. The on-disk format is::

    b"FTEN" | version:u32 | ndim:u32 | dims:u64[ndim] | payload:f32[prod(dims)]

with every integer and float little-endian.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError

MAGIC = b"FTEN"
VERSION = 1
MAX_NDIM = 16
_PAYLOAD_DTYPE = np.dtype("<f4")


def check_finite(x: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} contains NaN or Inf")
    return x


def check_video(video: np.ndarray) -> np.ndarray:
    video = np.asarray(video)
    if video.ndim != 4:
        raise ShapeError(f"video must be (F, H, W, C), got shape {video.shape}")
    if min(video.shape) < 1:
        raise ShapeError(f"video dims must be >= 1, got {video.shape}")
    return video


def check_features(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeError(f"features must be (frames, sites, channels), got shape {x.shape}")
    if min(x.shape) < 1:
        raise ShapeError(f"feature dims must be >= 1, got {x.shape}")
    return x


def video_to_features(video: np.ndarray) -> np.ndarray:
    """(F, H, W, C) -> (F, H*W, C). Pixel sites become attention sites."""
    video = check_video(video)
    F, H, W, C = video.shape
    return video.reshape(F, H * W, C)


def features_to_video(x: np.ndarray, height: int, width: int) -> np.ndarray:
    x = check_features(x)
    F, S, C = x.shape
    if S != height * width:
        raise ShapeError(f"{S} sites cannot be laid out as {height}x{width}")
    return x.reshape(F, height, width, C)


def reshape_for_pca(x: np.ndarray) -> np.ndarray:
    """Sites-first ``(S, f, c)`` features to frames-first ``(f, S, c)``."""
    x = check_features(x)
    return np.ascontiguousarray(x.transpose(1, 0, 2))


def reshape_from_pca(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`reshape_for_pca`."""
    x = check_features(x)
    return np.ascontiguousarray(x.transpose(1, 0, 2))


def encode_tensor(tensor: np.ndarray) -> bytes:
    arr = np.asarray(tensor)
    if arr.ndim > MAX_NDIM:
        raise ShapeError(f"ndim {arr.ndim} exceeds format limit {MAX_NDIM}")
    check_finite(arr)
    payload = np.ascontiguousarray(arr, dtype=_PAYLOAD_DTYPE)
    check_finite(payload, "tensor after float32 conversion")
    header = MAGIC + struct.pack("<II", VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + payload.tobytes()


def decode_tensor(buf: bytes) -> np.ndarray:
    n = len(buf)
    if n < 4:
        raise FormatError("truncated magic", n)
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {bytes(buf[:4])!r}", 0)
    if n < 12:
        raise FormatError("truncated header", n)
    version, ndim = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if ndim > MAX_NDIM:
        raise FormatError(f"ndim {ndim} exceeds limit {MAX_NDIM}", 8)
    dims_end = 12 + 8 * ndim
    if n < dims_end:
        raise FormatError("truncated dims", n)
    dims = struct.unpack_from(f"<{ndim}Q", buf, 12)
    count = 1
    for i, d in enumerate(dims):
        count *= d
        if count * 4 > n:
            raise FormatError(f"dims {dims} overflow the file size", 12 + 8 * i)
    expected = dims_end + 4 * count
    if n < expected:
        raise FormatError(f"truncated payload: need {4 * count} bytes, have {n - dims_end}", n)
    if n > expected:
        raise FormatError(f"{n - expected} trailing bytes after payload", expected)
    arr = np.frombuffer(buf, dtype=_PAYLOAD_DTYPE, count=count, offset=dims_end)
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise FormatError("non-finite value in payload", dims_end + 4 * int(bad[0]))
    return arr.astype(np.float32).reshape(dims)


def write_tensor(tensor: np.ndarray, path: str | os.PathLike) -> None:
    Path(path).write_bytes(encode_tensor(tensor))


def read_tensor(path: str | os.PathLike) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())
