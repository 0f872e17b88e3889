"""Alias-method sampling from discrete distributions (Vose's variant)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidDistributionError(ValueError):
    pass


@dataclass(frozen=True)
class AliasTable:
    prob: np.ndarray
    alias: np.ndarray

    @property
    def n(self) -> int:
        return int(self.prob.size)

    def outcome_probabilities(self) -> np.ndarray:
        """Exact distribution encoded by the table."""
        n = self.n
        p = self.prob / n
        np.add.at(p, self.alias, (1.0 - self.prob) / n)
        return p


def build_alias_table(weights) -> AliasTable:
    """Vose's O(n) alias table for ``weights / sum(weights)``."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidDistributionError("weights must be a non-empty 1-d array")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidDistributionError("weights must be finite and non-negative")
    total = w.sum()
    if total <= 0:
        raise InvalidDistributionError("weights must have a positive sum")

    n = w.size
    scaled = (w / total * n).tolist()  # divide first: n / total overflows for subnormal totals
    prob = [1.0] * n
    alias = list(range(n))
    small = [i for i, p in enumerate(scaled) if p < 1.0]
    large = [i for i, p in enumerate(scaled) if p >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        if scaled[g] < 1.0:
            small.append(g)
        else:
            large.append(g)
    # leftovers are 1 up to rounding
    for i in small + large:
        prob[i] = 1.0
        alias[i] = i
    return AliasTable(np.asarray(prob, dtype=np.float64), np.asarray(alias, dtype=np.int64))


def alias_sample(table: AliasTable, rng: np.random.Generator, count: int) -> np.ndarray:
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    column = rng.integers(0, table.n, size=count)
    coin = rng.random(count)
    return np.where(coin < table.prob[column], column, table.alias[column]).astype(np.int64)
