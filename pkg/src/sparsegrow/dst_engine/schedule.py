"""Prune-grow schedule and growth strategy tags."""

from __future__ import annotations

import math
from dataclasses import dataclass

STATIC = "static"
SET_RANDOM = "set_random"
GSE_UNIFORM = "gse_uniform"
GSE_GRABO = "gse_grabo"
GSE_GRAEST = "gse_graest"
RIGL_DENSE = "rigl_dense"

STRATEGIES = (STATIC, SET_RANDOM, GSE_UNIFORM, GSE_GRABO, GSE_GRAEST, RIGL_DENSE)
GSE_STRATEGIES = (GSE_UNIFORM, GSE_GRABO, GSE_GRAEST)


def check_strategy(tag: str) -> str:
    if tag not in STRATEGIES:
        raise ValueError(f"unknown growth strategy {tag!r}; expected one of {STRATEGIES}")
    return tag


class ScheduleExpired(Exception):
    """Raised when a prune fraction is requested after the final prune-grow step."""


def ceil_count(x: float) -> int:
    """``ceil`` that ignores float noise just above an integer."""
    return math.ceil(x - 1e-9)


@dataclass(frozen=True)
class PruneGrowSchedule:
    T: int = 1000
    T_end: int = 1000
    alpha: float = 0.2
    gamma: float = 1.0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("update period T must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.T_end < self.T:
            raise ValueError("T_end must be >= T")

    def is_update_step(self, t: int) -> bool:
        """Steps are numbered from 1; rounds fire at T, 2T, ... up to T_end."""
        return t > 0 and t % self.T == 0 and t <= self.T_end

    def rounds_within(self, steps: int) -> int:
        return min(steps, self.T_end) // self.T

    def prune_fraction(self, t: int) -> float:
        return cosine_decay(t, self.alpha, self.T_end)


def cosine_decay(t, alpha, T_end):
    """``alpha/2 * (1 + cos(pi * t / T_end))`` for ``0 <= t <= T_end``."""
    if t > T_end:
        raise ScheduleExpired(f"step {t} is past the final prune-grow step {T_end}")
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == T_end:
        return 0.0
    return 0.5 * alpha * (1.0 + math.cos(math.pi * t / T_end))
