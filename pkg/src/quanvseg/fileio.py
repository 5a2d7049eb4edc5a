"""Binary file formats: QVT1 tensors and binary (P5) PGM rasters.

QVT1 layout, all multi-byte integers little-endian:

    bytes 0-3   magic  b"QVT1"
    byte  4     dtype  1 = float32 LE, 2 = float64 LE
    byte  5     ndim   1..4
    next        ndim x uint32 extents
    payload     row-major values

PGM is binary P5 with maxval 255 or 65535 (16-bit samples big-endian,
per the netpbm convention).  Masks are PGM files holding only 0 and
maxval.
"""

from __future__ import annotations

import struct

import numpy as np

from .exceptions import FileFormatError, TruncatedFileError

_MAGIC = b"QVT1"
_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_FOR = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


def tensor_to_bytes(array: np.ndarray) -> bytes:
    """Serialize a float32/float64 array (1-4 dims) as a QVT1 record."""
    array = np.asarray(array)
    if array.dtype not in _CODE_FOR:
        raise ValueError(f"QVT1 stores float32/float64 only, got {array.dtype}")
    if not 1 <= array.ndim <= 4:
        raise ValueError(f"QVT1 stores 1-4 dims, got {array.ndim}")
    if any(e <= 0 or e >= 2**32 for e in array.shape):
        raise ValueError(f"extents must fit uint32 and be positive: {array.shape}")
    head = _MAGIC + struct.pack("<BB", _CODE_FOR[array.dtype], array.ndim)
    head += struct.pack(f"<{array.ndim}I", *array.shape)
    return head + np.ascontiguousarray(array).astype(array.dtype.newbyteorder("<")).tobytes()


def tensor_from_bytes(buf: bytes, base_offset: int = 0) -> np.ndarray:
    """Parse one QVT1 record; offsets in errors are absolute in the file."""
    if len(buf) < 4 or buf[:4] != _MAGIC:
        raise FileFormatError("bad magic, expected b'QVT1'", offset=base_offset)
    if len(buf) < 6:
        raise TruncatedFileError("header cut short", offset=base_offset + 4)
    code, ndim = buf[4], buf[5]
    if code not in _DTYPE_CODES:
        raise FileFormatError(f"unknown dtype code {code}", offset=base_offset + 4)
    if not 1 <= ndim <= 4:
        raise FileFormatError(f"ndim must be 1..4, got {ndim}", offset=base_offset + 5)
    need = 6 + 4 * ndim
    if len(buf) < need:
        raise TruncatedFileError("extent list cut short", offset=base_offset + 6)
    shape = struct.unpack(f"<{ndim}I", buf[6:need])
    if any(e == 0 for e in shape):
        raise FileFormatError(f"zero extent in shape {shape}", offset=base_offset + 6)
    dtype = _DTYPE_CODES[code]
    count = int(np.prod(shape))
    end = need + count * dtype.itemsize
    if len(buf) < end:
        raise TruncatedFileError(
            f"payload needs {end - need} bytes, found {len(buf) - need}",
            offset=base_offset + need,
        )
    data = np.frombuffer(buf[need:end], dtype=dtype).reshape(shape)
    return data.astype(dtype.newbyteorder("="))


def tensor_record_size(buf: bytes, base_offset: int = 0) -> int:
    """Byte length of the QVT1 record starting at buf[0]."""
    arr_ndim = buf[5] if len(buf) >= 6 else 0
    if len(buf) < 6 or not 1 <= arr_ndim <= 4:
        # delegate to the full parser for a precise error
        tensor_from_bytes(buf, base_offset)
    shape = struct.unpack(f"<{arr_ndim}I", buf[6 : 6 + 4 * arr_ndim])
    itemsize = _DTYPE_CODES.get(buf[4], np.dtype("<f8")).itemsize
    return 6 + 4 * arr_ndim + int(np.prod(shape)) * itemsize


def write_tensor(path, array: np.ndarray):
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(array))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())


def write_pgm(path, values: np.ndarray, maxval: int = 255):
    """Write a 2-D array of values in [0, 1] as binary PGM."""
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"PGM stores 2-D rasters, got shape {values.shape}")
    if values.min() < 0.0 or values.max() > 1.0:
        raise ValueError("PGM values must lie in [0, 1]")
    quantized = np.rint(values * maxval)
    samples = quantized.astype(">u2" if maxval == 65535 else np.uint8)
    header = f"P5\n{values.shape[1]} {values.shape[0]}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + samples.tobytes())


def _pgm_tokens(buf: bytes):
    """Yield (token, end_offset) for the three header tokens after P5."""
    i = 2  # past magic
    for _ in range(3):
        while i < len(buf) and (buf[i : i + 1].isspace() or buf[i] == ord("#")):
            if buf[i] == ord("#"):
                while i < len(buf) and buf[i] != ord("\n"):
                    i += 1
            i += 1
        start = i
        while i < len(buf) and not buf[i : i + 1].isspace():
            i += 1
        if start == i:
            raise FileFormatError("incomplete PGM header", offset=start)
        yield buf[start:i], i
        i += 1  # single whitespace after token


def read_pgm(path):
    """Read binary PGM; returns (values in [0, 1] float64, maxval)."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:2] != b"P5":
        raise FileFormatError("not a binary PGM (magic P5)", offset=0)
    fields = []
    end = 2
    for token, end in _pgm_tokens(buf):
        try:
            fields.append(int(token))
        except ValueError:
            raise FileFormatError(f"bad header token {token!r}", offset=end) from None
    width, height, maxval = fields
    if maxval not in (255, 65535):
        raise FileFormatError(f"maxval must be 255 or 65535, got {maxval}", offset=end)
    data_at = end + 1
    dtype = np.dtype(">u2") if maxval == 65535 else np.dtype(np.uint8)
    need = width * height * dtype.itemsize
    if len(buf) - data_at < need:
        raise TruncatedFileError(
            f"payload needs {need} bytes, found {len(buf) - data_at}", offset=data_at
        )
    raw = np.frombuffer(buf[data_at : data_at + need], dtype=dtype)
    return raw.reshape(height, width).astype(np.float64) / maxval, maxval
