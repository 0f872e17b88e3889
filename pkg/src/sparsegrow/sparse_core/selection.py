"""Deterministic top-k selection."""

from __future__ import annotations

import numpy as np


def select_top_k(values, k: int, keys=None) -> np.ndarray:
    """Positions of the ``k`` largest entries of ``values``, ascending.

    Ties at the selection boundary go to the entry with the smaller key
    (``keys`` defaults to the position).  The threshold is located with
    ``np.partition`` (introselect), so the average cost is linear.
    """
    values = np.asarray(values)
    n = values.size
    if not 0 <= k <= n:
        raise IndexError(f"k={k} outside [0, {n}]")
    if np.isnan(values).any():
        raise ValueError("cannot rank NaN values")
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    if k == n:
        return np.arange(n, dtype=np.int64)
    keys = np.arange(n, dtype=np.int64) if keys is None else np.asarray(keys)

    threshold = np.partition(values, n - k)[n - k]
    above = np.flatnonzero(values > threshold)
    tied = np.flatnonzero(values == threshold)
    need = k - above.size
    if need < tied.size:
        tied = tied[np.argpartition(keys[tied], need - 1)[:need]] if need > 0 else tied[:0]
    return np.sort(np.concatenate([above, tied]))
