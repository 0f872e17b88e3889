"""Sparse x dense kernels.

All kernels are serial loops compiled with numba, so the reduction order
is fixed and results are bitwise reproducible for a given input.  Dense
operands are laid out ``units x batch`` (C order), which keeps the inner
loop over the batch contiguous.
"""

from __future__ import annotations

import numba
import numpy as np

from .connections import ConnectionSet, CsrMatrix

_jit = numba.njit(cache=True, nogil=True)


@_jit
def _csr_spmm(offsets, cols, vals, dense, out):
    batch = dense.shape[1]
    for row in range(offsets.size - 1):
        for p in range(offsets[row], offsets[row + 1]):
            w = vals[p]
            src = cols[p]
            for j in range(batch):
                out[row, j] += w * dense[src, j]


@_jit
def _csr_spmm_t(offsets, cols, vals, dense, out):
    batch = dense.shape[1]
    for row in range(offsets.size - 1):
        for p in range(offsets[row], offsets[row + 1]):
            w = vals[p]
            dst = cols[p]
            for j in range(batch):
                out[dst, j] += w * dense[row, j]


@_jit
def _coo_spmm(rows, cols, vals, dense, out):
    batch = dense.shape[1]
    for p in range(vals.size):
        w = vals[p]
        r = rows[p]
        c = cols[p]
        for j in range(batch):
            out[r, j] += w * dense[c, j]


@_jit
def _gather(a_idx, b_idx, h, delta, out):
    batch = h.shape[1]
    for p in range(a_idx.size):
        a = a_idx[p]
        b = b_idx[p]
        acc = 0.0
        for j in range(batch):
            acc += h[a, j] * delta[b, j]
        out[p] = acc


@_jit
def _dense_grad(h, delta, out):
    n_in, batch = h.shape
    for b in range(delta.shape[0]):
        for a in range(n_in):
            acc = 0.0
            for j in range(batch):
                acc += h[a, j] * delta[b, j]
            out[b, a] = acc


@_jit
def _dense_blocked(w, x, out, block):
    n_rows, n_inner = w.shape
    batch = x.shape[1]
    for i0 in range(0, n_rows, block):
        i1 = min(i0 + block, n_rows)
        for k0 in range(0, n_inner, block):
            k1 = min(k0 + block, n_inner)
            for i in range(i0, i1):
                for k in range(k0, k1):
                    wik = w[i, k]
                    for j in range(batch):
                        out[i, j] += wik * x[k, j]


def _check_dense(dense, n_rows, what):
    dense = np.asarray(dense)
    if dense.ndim != 2 or dense.shape[0] != n_rows:
        raise ValueError(f"{what}: expected a matrix with {n_rows} rows, got shape {dense.shape}")
    return np.ascontiguousarray(dense)


def csr_spmm(csr: CsrMatrix, dense) -> np.ndarray:
    dense = _check_dense(dense, csr.n_cols, "csr_spmm")
    out = np.zeros((csr.n_rows, dense.shape[1]), dtype=np.result_type(csr.values, dense))
    _csr_spmm(csr.row_offsets, csr.col_indices, csr.values.astype(out.dtype, copy=False),
              dense.astype(out.dtype, copy=False), out)
    return out


def coo_spmm(rows, cols, values, shape, dense) -> np.ndarray:
    n_rows, n_cols = shape
    dense = _check_dense(dense, n_cols, "coo_spmm")
    values = np.asarray(values)
    out = np.zeros((n_rows, dense.shape[1]), dtype=np.result_type(values, dense))
    _coo_spmm(np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64),
              values.astype(out.dtype, copy=False), dense.astype(out.dtype, copy=False), out)
    return out


def dense_matmul(weights, dense, block: int = 64) -> np.ndarray:
    """Cache-blocked dense ``weights @ dense`` used as the benchmark baseline."""
    weights = np.ascontiguousarray(weights)
    dense = _check_dense(dense, weights.shape[1], "dense_matmul")
    out = np.zeros((weights.shape[0], dense.shape[1]), dtype=np.result_type(weights, dense))
    _dense_blocked(weights.astype(out.dtype, copy=False), dense.astype(out.dtype, copy=False), out, block)
    return out


def spmm(conn: ConnectionSet, dense) -> np.ndarray:
    """``out[b, j] = sum_a theta(a, b) * dense[a, j]`` over active ``(a, b)``."""
    return csr_spmm(conn.csr(), _check_dense(dense, conn.n_in, "spmm"))


def spmm_transposed(conn: ConnectionSet, dense) -> np.ndarray:
    """``out[a, j] = sum_b theta(a, b) * dense[b, j]``; the input-gradient pass."""
    dense = _check_dense(dense, conn.n_out, "spmm_transposed")
    out = np.zeros((conn.n_in, dense.shape[1]), dtype=np.result_type(conn.weights, dense))
    _csr_spmm_t(conn.row_offsets, conn.in_idx, conn.weights.astype(out.dtype, copy=False),
                dense.astype(out.dtype, copy=False), out)
    return out


def gather_connection_grads(in_idx, out_idx, h_prev, delta) -> np.ndarray:
    """Signed weight gradients ``sum_i h_prev[a, i] * delta[b, i]`` for given pairs.

    Cost is O(len(pairs) * batch); the full gradient matrix is never built.
    """
    h_prev = np.ascontiguousarray(h_prev)
    delta = np.ascontiguousarray(delta)
    if h_prev.shape[1] != delta.shape[1]:
        raise ValueError(f"batch mismatch: {h_prev.shape[1]} vs {delta.shape[1]}")
    in_idx = np.asarray(in_idx, dtype=np.int64)
    out = np.zeros(in_idx.size, dtype=np.result_type(h_prev, delta))
    _gather(in_idx, np.asarray(out_idx, dtype=np.int64),
            h_prev.astype(out.dtype, copy=False), delta.astype(out.dtype, copy=False), out)
    return out


def dense_gradient(h_prev, delta) -> np.ndarray:
    """Full ``n_out x n_in`` weight gradient.

    Same summation order as :func:`gather_connection_grads`, so entries
    agree bitwise.  Only the dense-gradient baseline may call this.
    """
    h_prev = np.ascontiguousarray(h_prev)
    delta = np.ascontiguousarray(delta)
    if h_prev.shape[1] != delta.shape[1]:
        raise ValueError(f"batch mismatch: {h_prev.shape[1]} vs {delta.shape[1]}")
    out = np.empty((delta.shape[0], h_prev.shape[0]), dtype=np.result_type(h_prev, delta))
    _dense_grad(h_prev.astype(out.dtype, copy=False), delta.astype(out.dtype, copy=False), out)
    return out
