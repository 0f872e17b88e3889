"""Input/output unit distributions used to sample candidate connections.

Sampling ``a ~ f`` and ``b ~ g`` independently induces the joint
``f(a) * g(b)`` over all connections of a layer without ever representing
it.  GraBo uses the row L1 norms of the activations and output gradients,
whose outer product bounds ``|h delta^T|`` from above.  GraEst projects both
onto one shared random sign vector, which makes ``(h s)(delta s)^T`` an
unbiased estimate of ``h delta^T``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .schedule import GSE_GRABO, GSE_GRAEST, GSE_UNIFORM, RIGL_DENSE, SET_RANDOM, STATIC

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UnitDistributions:
    f: np.ndarray
    g: np.ndarray

    def joint(self) -> np.ndarray:
        """``n_in x n_out`` joint probabilities.  For tests on small layers."""
        return np.outer(self.f, self.g)


def sample_signs(rng: np.random.Generator, batch: int) -> np.ndarray:
    return rng.choice(np.array([-1.0, 1.0]), size=batch)


def _normalize(scores, side):
    total = scores.sum()
    if not np.isfinite(total) or total <= 0:
        log.info("zero normalizer for %s distribution; falling back to uniform", side)
        return np.full(scores.size, 1.0 / scores.size)
    return scores / total


def build_distribution(strategy, h_prev, delta, signs=None) -> UnitDistributions:
    """Unit distributions for one layer from its cached ``h_{l-1}`` and ``delta_l``.

    ``h_prev`` is ``n_in x B`` and ``delta`` is ``n_out x B``.  Uniform ignores
    both.  GraEst needs ``signs`` with one entry per batch column.
    """
    n_in, n_out = h_prev.shape[0], delta.shape[0]
    if strategy in (GSE_UNIFORM, SET_RANDOM, STATIC, RIGL_DENSE):
        return UnitDistributions(np.full(n_in, 1.0 / n_in), np.full(n_out, 1.0 / n_out))
    if strategy == GSE_GRABO:
        f = np.abs(h_prev).sum(axis=1)
        g = np.abs(delta).sum(axis=1)
    elif strategy == GSE_GRAEST:
        if signs is None or len(signs) != h_prev.shape[1]:
            raise ValueError("GraEst needs one random sign per batch column")
        f = np.abs(h_prev @ signs)
        g = np.abs(delta @ signs)
    else:
        raise ValueError(f"no sampling distribution for strategy {strategy!r}")
    return UnitDistributions(_normalize(f.astype(np.float64), "input"), _normalize(g.astype(np.float64), "output"))
