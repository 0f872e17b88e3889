"""Active connection sets and their compressed sparse row view.

A layer's weights are stored only as the list of active ``(in_unit,
out_unit)`` pairs with one weight and one momentum slot per pair.  The
pairs are kept sorted by ``(out_unit, in_unit)``, which makes the CSR view
(rows = output units) a by-product of the storage order: the column array
is ``in_idx`` and the value array is ``weights`` itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

INDEX_DTYPE = np.int64


class ConnectionIndex(NamedTuple):
    in_unit: int
    out_unit: int


def linear_keys(in_idx, out_idx, n_in):
    """Linearized connection index ``out * n_in + in`` (the tie-break order)."""
    return np.asarray(out_idx, dtype=INDEX_DTYPE) * n_in + np.asarray(in_idx, dtype=INDEX_DTYPE)


@dataclass(frozen=True)
class CsrMatrix:
    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    @classmethod
    def from_coo(cls, rows, cols, values, shape) -> "CsrMatrix":
        """Build from coordinate triplets; duplicates are rejected."""
        n_rows, n_cols = shape
        rows = np.asarray(rows, dtype=INDEX_DTYPE)
        cols = np.asarray(cols, dtype=INDEX_DTYPE)
        values = np.asarray(values)
        keys = rows * n_cols + cols
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if keys.size > 1 and np.any(keys[1:] == keys[:-1]):
            raise ValueError("duplicate coordinates in COO input")
        rows, cols, values = rows[order], cols[order], values[order]
        offsets = np.zeros(n_rows + 1, dtype=INDEX_DTYPE)
        np.cumsum(np.bincount(rows, minlength=n_rows), out=offsets[1:])
        return cls(n_rows, n_cols, offsets, cols, values)

    def to_coo(self):
        rows = np.repeat(np.arange(self.n_rows, dtype=INDEX_DTYPE), np.diff(self.row_offsets))
        return rows, self.col_indices.copy(), self.values.copy()

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=self.values.dtype)
        rows, cols, vals = self.to_coo()
        out[rows, cols] = vals
        return out


@dataclass
class ConnectionSet:
    """Active connections of one layer, sorted by ``(out_unit, in_unit)``.

    ``weights`` and ``momentum`` are aligned with ``in_idx``/``out_idx``.
    Use :meth:`from_pairs` to build one from unsorted input.
    """

    n_in: int
    n_out: int
    in_idx: np.ndarray
    out_idx: np.ndarray
    weights: np.ndarray
    momentum: np.ndarray
    _row_offsets: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n_in < 1 or self.n_out < 1:
            raise ValueError(f"layer dimensions must be positive, got {self.n_in}x{self.n_out}")
        n = len(self.in_idx)
        if not (len(self.out_idx) == len(self.weights) == len(self.momentum) == n):
            raise ValueError("connections, weights and momentum must have equal length")
        if n > self.n_in * self.n_out:
            raise ValueError("more connections than the dense layer holds")

    @classmethod
    def from_pairs(cls, n_in, n_out, in_idx, out_idx, weights=None, momentum=None, dtype=np.float64):
        in_idx = np.asarray(in_idx, dtype=INDEX_DTYPE)
        out_idx = np.asarray(out_idx, dtype=INDEX_DTYPE)
        if in_idx.size and (in_idx.min() < 0 or in_idx.max() >= n_in):
            raise ValueError("in_unit index out of range")
        if out_idx.size and (out_idx.min() < 0 or out_idx.max() >= n_out):
            raise ValueError("out_unit index out of range")
        keys = linear_keys(in_idx, out_idx, n_in)
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        if sorted_keys.size > 1 and np.any(sorted_keys[1:] == sorted_keys[:-1]):
            raise ValueError("duplicate connections")
        n = in_idx.size
        weights = np.zeros(n, dtype=dtype) if weights is None else np.asarray(weights, dtype=dtype)[order]
        momentum = np.zeros(n, dtype=dtype) if momentum is None else np.asarray(momentum, dtype=dtype)[order]
        return cls(n_in, n_out, in_idx[order], out_idx[order], weights, momentum)

    @classmethod
    def empty(cls, n_in, n_out, dtype=np.float64):
        z = np.zeros(0, dtype=INDEX_DTYPE)
        return cls(n_in, n_out, z, z.copy(), np.zeros(0, dtype=dtype), np.zeros(0, dtype=dtype))

    def __len__(self) -> int:
        return int(self.in_idx.size)

    @property
    def dtype(self):
        return self.weights.dtype

    @property
    def keys(self) -> np.ndarray:
        """Linearized indices; ascending because of the storage order."""
        return linear_keys(self.in_idx, self.out_idx, self.n_in)

    @property
    def row_offsets(self) -> np.ndarray:
        if self._row_offsets is None or self._row_offsets[-1] != len(self):
            offsets = np.zeros(self.n_out + 1, dtype=INDEX_DTYPE)
            np.cumsum(np.bincount(self.out_idx, minlength=self.n_out), out=offsets[1:])
            self._row_offsets = offsets
        return self._row_offsets

    def csr(self) -> CsrMatrix:
        return CsrMatrix(self.n_out, self.n_in, self.row_offsets, self.in_idx, self.weights)

    def fan_in(self) -> np.ndarray:
        """Number of active connections into each output unit."""
        return np.diff(self.row_offsets)

    def density(self) -> float:
        return len(self) / (self.n_in * self.n_out)

    def copy(self) -> "ConnectionSet":
        return ConnectionSet(
            self.n_in, self.n_out, self.in_idx.copy(), self.out_idx.copy(),
            self.weights.copy(), self.momentum.copy(),
        )

    def astype(self, dtype) -> "ConnectionSet":
        return ConnectionSet(
            self.n_in, self.n_out, self.in_idx.copy(), self.out_idx.copy(),
            self.weights.astype(dtype), self.momentum.astype(dtype),
        )

    def connections(self) -> list[ConnectionIndex]:
        return [ConnectionIndex(int(a), int(b)) for a, b in zip(self.in_idx, self.out_idx)]

    def replace(self, prune_positions, grow_in, grow_out) -> "ConnectionSet":
        """Drop the connections at ``prune_positions`` and add new ones.

        Grown connections enter with weight 0 and momentum 0.  Pruned
        weights and momenta are discarded.
        """
        keep = np.ones(len(self), dtype=bool)
        keep[np.asarray(prune_positions, dtype=INDEX_DTYPE)] = False
        grow_in = np.asarray(grow_in, dtype=INDEX_DTYPE)
        grow_out = np.asarray(grow_out, dtype=INDEX_DTYPE)
        zeros = np.zeros(grow_in.size, dtype=self.dtype)
        return ConnectionSet.from_pairs(
            self.n_in, self.n_out,
            np.concatenate([self.in_idx[keep], grow_in]),
            np.concatenate([self.out_idx[keep], grow_out]),
            np.concatenate([self.weights[keep], zeros]),
            np.concatenate([self.momentum[keep], zeros]),
            dtype=self.dtype,
        )

    def to_dense(self) -> np.ndarray:
        """Dense ``n_out x n_in`` weight matrix.  Only for tests and oracles."""
        out = np.zeros((self.n_out, self.n_in), dtype=self.dtype)
        out[self.out_idx, self.in_idx] = self.weights
        return out


def set_difference(sampled_in, sampled_out, active: ConnectionSet):
    """Remove duplicates and active connections from a batch of samples.

    Returns ``(in_idx, out_idx)`` of the surviving inactive connections,
    ordered by linearized index.  The result never exceeds the number of
    samples.
    """
    keys = np.unique(linear_keys(sampled_in, sampled_out, active.n_in))
    active_keys = active.keys
    if active_keys.size and keys.size:
        pos = np.searchsorted(active_keys, keys)
        pos[pos == active_keys.size] = 0
        keys = keys[active_keys[pos] != keys]
    return keys % active.n_in, keys // active.n_in


def inactive_keys_at(active: ConnectionSet, ordinals) -> np.ndarray:
    """Linearized keys of the inactive connections with the given ranks.

    Rank ``j`` is the ``j``-th inactive connection in key order.  Runs in
    O(len(ordinals) * log |A|) without enumerating the inactive set.
    """
    ordinals = np.asarray(ordinals, dtype=INDEX_DTYPE)
    gaps = active.keys - np.arange(len(active), dtype=INDEX_DTYPE)
    return ordinals + np.searchsorted(gaps, ordinals, side="right")


def inactive_keys(active: ConnectionSet) -> np.ndarray:
    """Every inactive key; O(n_in * n_out), for the dense baseline only."""
    mask = np.ones(active.n_in * active.n_out, dtype=bool)
    mask[active.keys] = False
    return np.flatnonzero(mask)
