"""Minimal single-file NIfTI-1 support for 3D scalar volumes.

Only the subset this pipeline needs: ``.nii`` / ``.nii.gz``, header dims
``[3, H, W, S]``, datatypes uint8 / int16 / int32 / float32 / float64,
either byte order on read, little-endian on write. Two-file ``.hdr``/``.img``
pairs and 4D+ data are rejected.
"""

from __future__ import annotations

import gzip
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import FormatError

HEADER_SIZE = 348
_VOX_OFFSET = 352.0
_MAGIC_SINGLE = b"n+1\x00"
_MAGIC_PAIR = b"ni1\x00"

_CODE_TO_DTYPE = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
}
_DTYPE_TO_CODE = {np.dtype(v): k for k, v in _CODE_TO_DTYPE.items()}


def _open(path, mode):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def _write_bytes(path, payload: bytes) -> None:
    # gzip.compress embeds neither filename nor timestamp, so identical
    # voxels give identical bytes on every run
    path = str(path)
    if path.endswith(".gz"):
        payload = gzip.compress(payload, mtime=0)
    with open(path, "wb") as fh:
        fh.write(payload)


def read(path: str | Path) -> tuple[np.ndarray, tuple[float, float, float] | None]:
    """Read a 3D NIfTI-1 file.

    Returns ``(voxels, spacing)`` where voxels is float64 of shape
    (H, W, S) = (row, column, slice) and spacing is per-axis mm or None.
    Raises FormatError for anything outside the supported subset; missing or
    unreadable files surface as the underlying OSError.
    """
    with _open(path, "rb") as fh:
        try:
            raw = fh.read()
        except (EOFError, gzip.BadGzipFile, zlib.error) as e:
            raise FormatError(f"{path}: corrupt gzip stream ({e})") from e
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")

    for order in ("<", ">"):
        (sizeof_hdr,) = struct.unpack_from(order + "i", raw, 0)
        if sizeof_hdr == HEADER_SIZE:
            break
    else:
        raise FormatError(f"{path}: not a NIfTI-1 file (bad sizeof_hdr)")

    magic = raw[344:348]
    if magic == _MAGIC_PAIR:
        raise FormatError(f"{path}: two-file NIfTI (.hdr/.img) is not supported")
    if magic != _MAGIC_SINGLE:
        raise FormatError(f"{path}: bad magic {magic!r}")

    dim = struct.unpack_from(order + "8h", raw, 40)
    if dim[0] != 3:
        raise FormatError(
            f"{path}: only 3D scalar volumes are supported, file declares {dim[0]}D"
        )
    h, w, s = int(dim[1]), int(dim[2]), int(dim[3])
    if h < 1 or w < 1 or s < 1:
        raise FormatError(f"{path}: non-positive dims {(h, w, s)}")

    (datatype,) = struct.unpack_from(order + "h", raw, 70)
    if datatype not in _CODE_TO_DTYPE:
        raise FormatError(f"{path}: unsupported datatype code {datatype}")
    dtype = np.dtype(_CODE_TO_DTYPE[datatype]).newbyteorder(order)

    pixdim = struct.unpack_from(order + "8f", raw, 76)
    (vox_offset,) = struct.unpack_from(order + "f", raw, 108)
    scl_slope, scl_inter = struct.unpack_from(order + "2f", raw, 112)

    offset = int(vox_offset)
    count = h * w * s
    need = offset + count * dtype.itemsize
    if len(raw) < need:
        raise FormatError(f"{path}: data truncated ({len(raw)} < {need} bytes)")
    flat = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)

    # dim[1] (= H) varies fastest on disk, so the file is (S, W, H) in C order.
    voxels = flat.reshape((s, w, h)).transpose(2, 1, 0).astype(np.float64)
    if scl_slope not in (0.0, 1.0) or (scl_slope == 1.0 and scl_inter != 0.0):
        voxels = voxels * float(scl_slope) + float(scl_inter)

    spacing = tuple(float(x) for x in pixdim[1:4])
    if any(x <= 0 for x in spacing):
        spacing = None
    return voxels, spacing


def write(
    path: str | Path,
    voxels: np.ndarray,
    dtype=np.float64,
    spacing: tuple[float, float, float] | None = None,
) -> None:
    """Write a (H, W, S) array as a little-endian single-file NIfTI-1."""
    voxels = np.asarray(voxels)
    if voxels.ndim != 3:
        raise FormatError(f"expected a 3D array, got shape {voxels.shape}")
    dtype = np.dtype(dtype)
    if dtype not in _DTYPE_TO_CODE:
        raise FormatError(f"unsupported on-disk dtype {dtype}")

    h, w, s = voxels.shape
    hdr = bytearray(int(_VOX_OFFSET))
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, h, w, s, 1, 1, 1, 1)
    struct.pack_into("<2h", hdr, 70, _DTYPE_TO_CODE[dtype], dtype.itemsize * 8)
    sp = spacing if spacing is not None else (1.0, 1.0, 1.0)
    struct.pack_into("<8f", hdr, 76, 1.0, sp[0], sp[1], sp[2], 1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<f", hdr, 108, _VOX_OFFSET)
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)  # scl_slope, scl_inter
    hdr[344:348] = _MAGIC_SINGLE

    data = voxels.transpose(2, 1, 0).astype(dtype.newbyteorder("<")).tobytes()
    _write_bytes(path, bytes(hdr) + data)
