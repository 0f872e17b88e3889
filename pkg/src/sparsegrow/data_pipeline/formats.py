"""Readers and writers for the MNIST IDX and CIFAR binary file formats.

IDX layout: two zero bytes, a type code, the number of dimensions, one
big-endian uint32 per dimension, then the raw big-endian payload.  Files
ending in ``.gz`` are transparently decompressed.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

IDX_TYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
_TYPE_CODES = {dt.newbyteorder("="): code for code, dt in IDX_TYPES.items()}

CIFAR_SIDE = 32
CIFAR_PIXELS = 3 * CIFAR_SIDE * CIFAR_SIDE


class IdxFormatError(ValueError):
    """Malformed IDX content; the message names the byte offset."""


class CifarFormatError(ValueError):
    pass


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def parse_idx(data: bytes) -> np.ndarray:
    if len(data) < 4:
        raise IdxFormatError(f"offset 0: file has {len(data)} bytes, need a 4-byte magic number")
    if data[0] != 0 or data[1] != 0:
        raise IdxFormatError(f"offset 0: bad magic bytes {data[:2].hex()}, expected 0000")
    if data[2] not in IDX_TYPES:
        raise IdxFormatError(f"offset 2: unknown type code 0x{data[2]:02x}")
    dtype, ndim = IDX_TYPES[data[2]], data[3]
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IdxFormatError(f"offset 4: truncated header, need {header} bytes for {ndim} dimensions")
    shape = struct.unpack(f">{ndim}I", data[4:header])
    size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(data) - header != size:
        raise IdxFormatError(
            f"offset {header}: payload has {len(data) - header} bytes, shape {shape} needs {size}"
        )
    return np.frombuffer(data, dtype=dtype, offset=header).reshape(shape).astype(dtype.newbyteorder("="))


def read_idx(path) -> np.ndarray:
    """Raw IDX array in native byte order."""
    return parse_idx(_read_bytes(path))


def encode_idx(array) -> bytes:
    array = np.asarray(array)
    native = array.dtype.newbyteorder("=")
    if native not in _TYPE_CODES:
        raise ValueError(f"dtype {array.dtype} has no IDX type code")
    code = _TYPE_CODES[native]
    header = bytes([0, 0, code, array.ndim]) + struct.pack(f">{array.ndim}I", *array.shape)
    return header + array.astype(IDX_TYPES[code]).tobytes()


def write_idx(path, array):
    path = Path(path)
    data = encode_idx(array)
    if path.suffix == ".gz":
        # mtime=0 keeps the compressed bytes reproducible
        with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
            fh.write(data)
    else:
        path.write_bytes(data)


def load_idx(path) -> np.ndarray:
    """IDX file as model-ready values.

    Unsigned-byte arrays with two or more dimensions are images and are
    scaled to [0, 1] as float32; everything else (labels) becomes int64.
    """
    raw = read_idx(path)
    if raw.dtype == np.uint8 and raw.ndim >= 2:
        return raw.astype(np.float32) / np.float32(255.0)
    if raw.ndim == 1 and np.issubdtype(raw.dtype, np.integer):
        return raw.astype(np.int64)
    return raw


def parse_cifar(data: bytes, label_bytes: int = 1):
    """Records of ``label_bytes`` labels plus 3072 channel-major pixels.

    CIFAR-10 has one label byte; CIFAR-100 has coarse then fine, and the
    fine label (the last one) is returned.
    """
    record = label_bytes + CIFAR_PIXELS
    if len(data) == 0 or len(data) % record:
        raise CifarFormatError(f"file size {len(data)} is not a positive multiple of {record}-byte records")
    rows = np.frombuffer(data, dtype=np.uint8).reshape(-1, record)
    labels = rows[:, label_bytes - 1].astype(np.int64)
    images = rows[:, label_bytes:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE).astype(np.float32) / np.float32(255.0)
    return images, labels


def load_cifar10_binary(path):
    return parse_cifar(_read_bytes(path), 1)


def load_cifar100_binary(path):
    return parse_cifar(_read_bytes(path), 2)
