"""Prune-grow rounds: guided stochastic exploration and its baselines.

One round, for any strategy:

1. build a candidate set of inactive connections per layer and score it
   (GSE: sampled subset scored by ``|grad|``; RigL: the full inactive
   complement scored by the dense gradient),
2. ``k = min(ceil(alpha_t * |A|), |S|)``,
3. grow the ``k`` best candidates and prune the ``k`` active connections of
   smallest ``|theta|``, pooled across all layers given,
4. grown connections start at weight 0 with zero momentum.

Ties are broken by the lower ``(layer, out_unit * n_in + in_unit)`` index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..sparse_core import (
    ConnectionSet,
    alias_sample,
    build_alias_table,
    dense_gradient,
    gather_connection_grads,
    inactive_keys,
    inactive_keys_at,
    select_top_k,
    set_difference,
)
from .distributions import UnitDistributions, build_distribution, sample_signs
from .schedule import (
    GSE_GRAEST,
    GSE_STRATEGIES,
    RIGL_DENSE,
    SET_RANDOM,
    STATIC,
    PruneGrowSchedule,
    ceil_count,
    check_strategy,
)

log = logging.getLogger(__name__)

_EMPTY = np.zeros(0, dtype=np.int64)


@dataclass
class SubsetSample:
    """Connection sets of one layer in one round, as ``(in_idx, out_idx)`` pairs."""

    S: tuple
    G: tuple
    P: tuple
    k: int

    @property
    def subset_size(self) -> int:
        return int(self.S[0].size)


@dataclass
class RoundReport:
    t: int
    alpha_t: float
    k: int
    samples: list = field(default_factory=list)

    @property
    def subset_sizes(self) -> list[int]:
        return [s.subset_size for s in self.samples]

    @property
    def grown(self) -> list[int]:
        return [int(s.G[0].size) for s in self.samples]

    @property
    def pruned(self) -> list[int]:
        return [int(s.P[0].size) for s in self.samples]


def sample_connections(dist: UnitDistributions, count, rng):
    """Draw ``count`` raw pairs ``a ~ f``, ``b ~ g`` (duplicates and active included)."""
    a = alias_sample(build_alias_table(dist.f), rng, count)
    b = alias_sample(build_alias_table(dist.g), rng, count)
    return a, b


def sample_candidates(dist: UnitDistributions, active: ConnectionSet, count, rng):
    """Sampled subset of inactive connections; at most ``count`` of them."""
    a, b = sample_connections(dist, count, rng)
    return set_difference(a, b, active)


def _uniform_inactive(conns, k, rng):
    """``k`` distinct inactive connections drawn uniformly from all given layers."""
    free = np.array([c.n_in * c.n_out - len(c) for c in conns], dtype=np.int64)
    ordinals = np.sort(rng.choice(int(free.sum()), size=k, replace=False)) if k else _EMPTY
    bounds = np.concatenate([[0], np.cumsum(free)])
    layer = np.searchsorted(bounds, ordinals, side="right") - 1
    picked = []
    for i, conn in enumerate(conns):
        keys = inactive_keys_at(conn, ordinals[layer == i] - bounds[i])
        picked.append((keys % conn.n_in, keys // conn.n_in))
    return picked


def _score_candidates(conns, views, strategy, gamma, rng, candidates):
    """Per-layer candidate pairs and their growth scores."""
    out = []
    signs = {}
    for i, conn in enumerate(conns):
        h_prev, delta = views[i]
        if candidates is not None:
            s_in, s_out = (np.asarray(c, dtype=np.int64) for c in candidates[i])
            scores = np.abs(gather_connection_grads(s_in, s_out, h_prev, delta))
        elif strategy == RIGL_DENSE:
            keys = inactive_keys(conn)
            s_in, s_out = keys % conn.n_in, keys // conn.n_in
            scores = np.abs(dense_gradient(h_prev, delta).ravel()[keys])
        else:
            batch = h_prev.shape[1]
            if strategy == GSE_GRAEST and batch not in signs:
                signs[batch] = sample_signs(rng, batch)
            dist = build_distribution(strategy, h_prev, delta, signs.get(batch))
            s_in, s_out = sample_candidates(dist, conn, ceil_count(gamma * len(conn)), rng)
            scores = np.abs(gather_connection_grads(s_in, s_out, h_prev, delta))
        out.append((s_in, s_out, scores))
    return out


def _layer_keys(conns, pieces):
    """Globally ordered tie-break keys: layer first, then linearized index."""
    offset = 0
    keys = []
    for conn, (in_idx, out_idx) in zip(conns, pieces):
        keys.append(offset + out_idx * conn.n_in + in_idx)
        offset += conn.n_in * conn.n_out
    return np.concatenate(keys) if keys else _EMPTY


def _split(positions, sizes):
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [positions[(positions >= lo) & (positions < hi)] - lo for lo, hi in zip(bounds[:-1], bounds[1:])]


def _select_prune(conns, k, grow_counts):
    """Positions (per layer) of the ``k`` smallest-magnitude active weights.

    Every layer keeps at least one connection after the round.
    """
    sizes = [len(c) for c in conns]
    magnitude = np.concatenate([np.abs(c.weights) for c in conns]) if conns else np.zeros(0)
    keys = _layer_keys(conns, [(c.in_idx, c.out_idx) for c in conns])
    chosen = select_top_k(-magnitude, k, keys)
    per_layer = _split(chosen, sizes)
    caps = [n - 1 + g for n, g in zip(sizes, grow_counts)]
    if all(p.size <= cap for p, cap in zip(per_layer, caps)):
        return per_layer

    log.warning("prune would empty a layer; keeping one connection per layer")
    order = np.lexsort((keys, magnitude))
    layer_of = np.repeat(np.arange(len(conns)), sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    taken = [[] for _ in conns]
    remaining = k
    for pos in order:
        if remaining == 0:
            break
        layer = layer_of[pos]
        if len(taken[layer]) < caps[layer]:
            taken[layer].append(pos - starts[layer])
            remaining -= 1
    return [np.sort(np.asarray(t, dtype=np.int64)) for t in taken]


def global_coordination(conns, views, schedule: PruneGrowSchedule, strategy, t, rng, candidates=None):
    """One prune-grow round pooled over all ``conns``.

    ``views[i]`` is ``(h_prev, delta)`` of layer ``i`` (unused by SET).
    ``candidates`` optionally fixes each layer's candidate subset, bypassing
    sampling.  Returns ``(new_conns, RoundReport)``; the total number of
    active connections is unchanged.
    """
    check_strategy(strategy)
    alpha_t = schedule.prune_fraction(t)
    total_active = sum(len(c) for c in conns)
    if strategy == STATIC:
        return list(conns), RoundReport(t, alpha_t, 0, [
            SubsetSample((_EMPTY, _EMPTY), (_EMPTY, _EMPTY), (_EMPTY, _EMPTY), 0) for _ in conns
        ])

    if strategy == SET_RANDOM and candidates is None:
        free = sum(c.n_in * c.n_out - len(c) for c in conns)
        k = min(ceil_count(alpha_t * total_active), free)
        grown = _uniform_inactive(conns, k, rng)
        subsets = grown
    else:
        if strategy not in GSE_STRATEGIES + (RIGL_DENSE,) and candidates is None:
            raise ValueError(f"strategy {strategy!r} needs explicit candidates")
        scored = _score_candidates(conns, views, strategy, schedule.gamma, rng, candidates)
        subsets = [(s_in, s_out) for s_in, s_out, _ in scored]
        n_candidates = sum(s[0].size for s in subsets)
        k = min(ceil_count(alpha_t * total_active), n_candidates)
        scores = np.concatenate([s for _, _, s in scored]) if scored else np.zeros(0)
        chosen = select_top_k(scores, k, _layer_keys(conns, subsets))
        grown = [(s_in[pos], s_out[pos]) for (s_in, s_out), pos in
                 zip(subsets, _split(chosen, [s[0].size for s in subsets]))]

    prune_pos = _select_prune(conns, k, [g[0].size for g in grown])
    new_conns = []
    samples = []
    for conn, (g_in, g_out), pos, subset in zip(conns, grown, prune_pos, subsets):
        pruned = (conn.in_idx[pos], conn.out_idx[pos])
        new_conns.append(conn.replace(pos, g_in, g_out))
        samples.append(SubsetSample(subset, (g_in, g_out), pruned, k))
    return new_conns, RoundReport(t, alpha_t, k, samples)


def grow_prune_step(conn, h_prev, delta, schedule, strategy, t, rng, candidates=None):
    """Layer-local round; returns ``(SubsetSample, new ConnectionSet)``."""
    cands = None if candidates is None else [candidates]
    new, report = global_coordination([conn], [(h_prev, delta)], schedule, strategy, t, rng, cands)
    return report.samples[0], new[0]


def rigl_grow_step(conn, h_prev, delta, schedule, t):
    """Dense-gradient baseline: candidates are all inactive connections."""
    new, _ = global_coordination([conn], [(h_prev, delta)], schedule, RIGL_DENSE, t, None)
    return new[0]


def set_grow_step(conn, schedule, t, rng):
    """Random-growth baseline: ``k`` inactive connections drawn uniformly."""
    new, _ = global_coordination([conn], [None], schedule, SET_RANDOM, t, rng)
    return new[0]
