"""Portable binary dump of a sparse model's topology and weights.

Layout, all little-endian::

    magic    4 bytes  b"SPGW"
    version  uint32   (currently 1)
    n_layers uint32
    fbytes   uint32   4 or 8: width of every stored real
    per layer:
        n_in uint32, n_out uint32, nnz uint64, has_bias uint8
        in_idx  int64[nnz]     (sorted by out_idx * n_in + in_idx)
        out_idx int64[nnz]
        weights real[nnz]
        bias    real[n_out]    (only when has_bias)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..sparse_core import ConnectionSet

MAGIC = b"SPGW"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
_LAYER = struct.Struct("<IIQB")


class SidecarError(ValueError):
    pass


def encode_model(params) -> bytes:
    """Serialize a list of ``LayerParams``."""
    dtypes = {lp.conn.dtype for lp in params}
    if len(dtypes) > 1:
        raise ValueError("all layers must share one dtype")
    fbytes = np.dtype(dtypes.pop() if dtypes else np.float64).itemsize
    real = np.dtype(f"<f{fbytes}")
    out = [_HEADER.pack(MAGIC, VERSION, len(params), fbytes)]
    for lp in params:
        conn = lp.conn
        out.append(_LAYER.pack(conn.n_in, conn.n_out, len(conn), lp.bias is not None))
        out.append(conn.in_idx.astype("<i8").tobytes())
        out.append(conn.out_idx.astype("<i8").tobytes())
        out.append(conn.weights.astype(real).tobytes())
        if lp.bias is not None:
            out.append(lp.bias.astype(real).tobytes())
    return b"".join(out)


def decode_model(data: bytes):
    """Inverse of :func:`encode_model`: list of ``(ConnectionSet, bias or None)``."""
    if len(data) < _HEADER.size:
        raise SidecarError("file too short for the header")
    magic, version, n_layers, fbytes = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SidecarError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SidecarError(f"unsupported version {version}")
    if fbytes not in (4, 8):
        raise SidecarError(f"unsupported real width {fbytes}")
    real = np.dtype(f"<f{fbytes}")
    pos = _HEADER.size
    layers = []

    def take(count, dtype):
        nonlocal pos
        size = count * np.dtype(dtype).itemsize
        if pos + size > len(data):
            raise SidecarError(f"truncated at offset {pos}")
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
        pos += size
        return arr.astype(np.dtype(dtype).newbyteorder("="))

    for _ in range(n_layers):
        if pos + _LAYER.size > len(data):
            raise SidecarError(f"truncated layer header at offset {pos}")
        n_in, n_out, nnz, has_bias = _LAYER.unpack_from(data, pos)
        pos += _LAYER.size
        in_idx, out_idx = take(nnz, "<i8"), take(nnz, "<i8")
        weights = take(nnz, real)
        bias = take(n_out, real) if has_bias else None
        layers.append((ConnectionSet.from_pairs(n_in, n_out, in_idx, out_idx, weights, dtype=weights.dtype), bias))
    if pos != len(data):
        raise SidecarError(f"{len(data) - pos} trailing bytes")
    return layers


def write_model(path, params):
    Path(path).write_bytes(encode_model(params))


def read_model(path):
    return decode_model(Path(path).read_bytes())
