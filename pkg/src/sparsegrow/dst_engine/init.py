"""Erdős–Rényi sparse initialization and the sparsity-to-epsilon solver."""

from __future__ import annotations

import numpy as np

from ..sparse_core import ConnectionSet
from .schedule import ceil_count


class InfeasibleSparsityError(ValueError):
    pass


def _dims(model_or_dims):
    if hasattr(model_or_dims, "parametric_layers"):
        return [(layer.n_in, layer.n_out) for layer in model_or_dims.parametric_layers()]
    return [tuple(d) for d in model_or_dims]


def random_connection_set(n_in, n_out, count, rng, dtype=np.float64) -> ConnectionSet:
    """``count`` distinct connections drawn uniformly without replacement."""
    if count > n_in * n_out:
        raise InfeasibleSparsityError(f"{count} connections do not fit a {n_in}x{n_out} layer")
    keys = rng.choice(n_in * n_out, size=count, replace=False)
    return ConnectionSet.from_pairs(n_in, n_out, keys % n_in, keys // n_in, dtype=dtype)


def erdos_renyi_count(n_in, n_out, epsilon) -> int:
    return ceil_count(epsilon * (n_in + n_out))


def erdos_renyi_init(n_in, n_out, epsilon, rng, dtype=np.float64) -> ConnectionSet:
    """Random bipartite layer with exactly ``ceil(epsilon*(n_in+n_out))`` connections."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    count = erdos_renyi_count(n_in, n_out, epsilon)
    if count > n_in * n_out:
        raise InfeasibleSparsityError(
            f"epsilon={epsilon} asks for {count} connections in a {n_in}x{n_out} layer"
        )
    return random_connection_set(n_in, n_out, count, rng, dtype)


def layer_counts(model_or_dims, epsilon) -> list[int]:
    """Per-layer Erdős–Rényi counts clamped to each layer's dense size."""
    return [min(erdos_renyi_count(a, b, epsilon), a * b) for a, b in _dims(model_or_dims)]


def target_count(model_or_dims, sparsity) -> int:
    dense = sum(a * b for a, b in _dims(model_or_dims))
    return int(round((1.0 - sparsity) * dense))


def solve_epsilon(model_or_dims, sparsity, iterations=200) -> float:
    """Epsilon whose clamped Erdős–Rényi counts hit the global sparsity target.

    Bisection on the monotone step function ``sum(layer_counts)``; the result
    is the largest epsilon that does not exceed the target count, or the
    smallest one above it when that lands closer.
    """
    if not 0.0 <= sparsity < 1.0:
        raise InfeasibleSparsityError(f"sparsity must lie in [0, 1), got {sparsity}")
    dims = _dims(model_or_dims)
    target = target_count(dims, sparsity)
    if target < len(dims):
        raise InfeasibleSparsityError(
            f"sparsity {sparsity} leaves {target} connections for {len(dims)} layers"
        )
    saturate = max(a * b / (a + b) for a, b in dims)
    if sum(layer_counts(dims, saturate)) <= target:
        return saturate
    lo, hi = 0.0, saturate
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if sum(layer_counts(dims, mid)) <= target:
            lo = mid
        else:
            hi = mid
    below = sum(layer_counts(dims, lo)) if lo > 0 else 0
    above = sum(layer_counts(dims, hi))
    return lo if lo > 0 and target - below <= above - target else hi


def uniform_layer_counts(model_or_dims, sparsity) -> list[int]:
    """Same density in every layer (the non-Erdős–Rényi assignment)."""
    return [max(1, int(round((1.0 - sparsity) * a * b))) for a, b in _dims(model_or_dims)]


def sparse_connection_sets(model, sparsity, rng, assignment="erdos_renyi", dtype=np.float64):
    """Sample the initial active sets of every parametric layer of ``model``."""
    dims = _dims(model)
    if assignment == "erdos_renyi":
        counts = layer_counts(dims, solve_epsilon(dims, sparsity))
    elif assignment == "uniform":
        counts = uniform_layer_counts(dims, sparsity)
    else:
        raise ValueError(f"unknown sparsity assignment {assignment!r}")
    return [random_connection_set(a, b, c, rng, dtype) for (a, b), c in zip(dims, counts)]
