"""Minimal NIfTI-1 reader/writer.

Only the header fields this toolkit interprets are handled: dimensions,
pixdim (voxel spacing) and datatype. Arrays are exposed in (depth, height,
width) axis order; on disk NIfTI stores the width axis fastest, so the
in-memory C layout maps to the file layout without copies.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

HEADER_SIZE = 348
VOX_OFFSET = 352

# NIfTI-1 datatype code -> numpy dtype
_DTYPES = {
    2: np.dtype(np.uint8),
    4: np.dtype(np.int16),
    8: np.dtype(np.int32),
    16: np.dtype(np.float32),
    64: np.dtype(np.float64),
    256: np.dtype(np.int8),
    512: np.dtype(np.uint16),
    768: np.dtype(np.uint32),
}
_DTYPE_CODES = {dt: code for code, dt in _DTYPES.items()}


class NiftiFormatError(ValueError):
    """Raised when a file cannot be parsed as single-file NIfTI-1."""


def _read_bytes(path: Path) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head == b"\x1f\x8b":
            with gzip.open(fh) as gz:
                return gz.read()
        return fh.read()


def read_nifti(path: str | Path) -> tuple[np.ndarray, tuple[float, float, float]]:
    """Read a .nii/.nii.gz file.

    Returns (voxels, spacing) with voxels shaped (depth, height, width) and
    spacing in mm per voxel along the same axes. Trailing singleton
    dimensions (e.g. a unit time axis) are squeezed away.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    raw = _read_bytes(path)
    if len(raw) < HEADER_SIZE:
        raise NiftiFormatError(f"{path}: file shorter than NIfTI-1 header")

    byteorder = "<"
    (sizeof_hdr,) = struct.unpack_from("<i", raw, 0)
    if sizeof_hdr != HEADER_SIZE:
        (sizeof_hdr,) = struct.unpack_from(">i", raw, 0)
        if sizeof_hdr != HEADER_SIZE:
            raise NiftiFormatError(f"{path}: bad sizeof_hdr, not a NIfTI-1 file")
        byteorder = ">"

    magic = raw[344:348]
    if magic[:3] == b"ni1":
        raise NiftiFormatError(f"{path}: detached .hdr/.img pairs are not supported")
    if magic[:3] != b"n+1":
        raise NiftiFormatError(f"{path}: bad magic {magic!r}")

    dim = struct.unpack_from(byteorder + "8h", raw, 40)
    (datatype, bitpix) = struct.unpack_from(byteorder + "2h", raw, 70)
    pixdim = struct.unpack_from(byteorder + "8f", raw, 76)
    (vox_offset,) = struct.unpack_from(byteorder + "f", raw, 108)

    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise NiftiFormatError(f"{path}: invalid dim[0]={ndim}")
    shape_xyz = [max(1, dim[i + 1]) for i in range(ndim)]
    # tolerate unit trailing axes (e.g. nt == 1)
    while len(shape_xyz) > 3 and shape_xyz[-1] == 1:
        shape_xyz.pop()

    if datatype not in _DTYPES:
        raise NiftiFormatError(f"{path}: unsupported datatype code {datatype}")
    dtype = _DTYPES[datatype].newbyteorder(byteorder)
    if bitpix != dtype.itemsize * 8:
        raise NiftiFormatError(f"{path}: bitpix {bitpix} inconsistent with datatype")

    offset = int(vox_offset) if vox_offset else VOX_OFFSET
    count = int(np.prod(shape_xyz))
    nbytes = count * dtype.itemsize
    if len(raw) < offset + nbytes:
        raise NiftiFormatError(f"{path}: truncated voxel data")

    flat = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    # file is Fortran-ordered over (x, y, z); C-reshape to reversed dims
    voxels = flat.reshape(tuple(reversed(shape_xyz)))
    voxels = np.asarray(voxels, dtype=dtype.newbyteorder("="))

    zooms = [float(pixdim[i + 1]) for i in range(len(shape_xyz))]
    spacing = tuple(reversed([z if z > 0 else 1.0 for z in zooms]))
    if len(spacing) < 3:
        spacing = (1.0,) * (3 - len(spacing)) + spacing
    return voxels, spacing[:3]


def write_nifti(
    path: str | Path,
    voxels: np.ndarray,
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> Path:
    """Write voxels shaped (depth, height, width) as single-file NIfTI-1.

    Gzip compression is chosen by the .gz suffix. Spacing follows the array
    axis order and is stored reversed as pixdim x/y/z.
    """
    path = Path(path)
    voxels = np.ascontiguousarray(voxels)
    if voxels.ndim != 3:
        raise ValueError(f"expected a 3D array, got shape {voxels.shape}")
    dtype = voxels.dtype.newbyteorder("=")
    if dtype not in _DTYPE_CODES:
        raise ValueError(f"unsupported dtype for NIfTI output: {voxels.dtype}")
    if len(spacing) != 3:
        raise ValueError("spacing must have 3 components")

    header = bytearray(HEADER_SIZE)
    struct.pack_into("<i", header, 0, HEADER_SIZE)
    shape_xyz = tuple(reversed(voxels.shape))
    struct.pack_into("<8h", header, 40, 3, *shape_xyz, 1, 1, 1, 1)
    struct.pack_into("<2h", header, 70, _DTYPE_CODES[dtype], dtype.itemsize * 8)
    pix_xyz = tuple(float(s) for s in reversed(spacing))
    struct.pack_into("<8f", header, 76, 1.0, *pix_xyz, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", header, 108, float(VOX_OFFSET))
    struct.pack_into("<2f", header, 112, 1.0, 0.0)  # scl_slope/scl_inter
    # identity-orientation sform so third-party viewers get a usable affine
    struct.pack_into("<2h", header, 252, 0, 1)  # qform_code, sform_code
    struct.pack_into("<4f", header, 280, pix_xyz[0], 0.0, 0.0, 0.0)
    struct.pack_into("<4f", header, 296, 0.0, pix_xyz[1], 0.0, 0.0)
    struct.pack_into("<4f", header, 312, 0.0, 0.0, pix_xyz[2], 0.0)
    header[344:348] = b"n+1\x00"

    payload = bytes(header) + b"\x00" * (VOX_OFFSET - HEADER_SIZE)
    data = voxels.astype(dtype, copy=False).tobytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wb") as fh:
        fh.write(payload)
        fh.write(data)
    return path
