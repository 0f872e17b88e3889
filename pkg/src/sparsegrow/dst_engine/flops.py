"""Analytic training FLOPs model.

A multiply-accumulate counts as 2 FLOPs.  Per training step and sample, a
parametric layer with ``|A|`` active connections applied at ``P`` output
positions costs ``2|A|P`` forward and ``4|A|P`` backward (input gradients
plus weight gradients on ``A``).  Every prune-grow round adds:

* GSE: weight gradients for the sampled subset, ``2|S|P`` with the expected
  ``|S| = gamma*|A|*(1 - density)``, plus the unit-distribution reductions
  for GraBo/GraEst;
* RigL: the dense weight gradient, which replaces the sparse one, i.e.
  ``2(n_in*n_out - |A|)P`` extra;
* SET and Static: nothing (sampling and top-k bookkeeping count as 0).
"""

from __future__ import annotations

from dataclasses import dataclass

from .init import layer_counts, solve_epsilon, uniform_layer_counts
from .schedule import GSE_GRABO, GSE_GRAEST, GSE_STRATEGIES, RIGL_DENSE, PruneGrowSchedule, check_strategy


@dataclass(frozen=True)
class FlopsLayer:
    n_in: int
    n_out: int
    positions: int = 1


@dataclass(frozen=True)
class FlopsEstimate:
    train_flops: float
    inference_flops: float
    base_step_flops: float
    round_overhead_flops: float
    rounds: int


def _conv(c_in, c_out, k, out_hw):
    return FlopsLayer(c_in * k * k, c_out, out_hw * out_hw)


def _resnet50_layers():
    layers = [_conv(3, 64, 7, 112)]
    in_c = 64
    for width, blocks, in_hw, out_hw in ((64, 3, 56, 56), (128, 4, 56, 28), (256, 6, 28, 14), (512, 3, 14, 7)):
        out_c = width * 4
        for block in range(blocks):
            first_hw = in_hw if block == 0 else out_hw
            layers.append(_conv(in_c, width, 1, first_hw))
            layers.append(_conv(width, width, 3, out_hw))
            layers.append(_conv(width, out_c, 1, out_hw))
            if block == 0:
                layers.append(_conv(in_c, out_c, 1, out_hw))
            in_c = out_c
    layers.append(FlopsLayer(2048, 1000, 1))
    return tuple(layers)


# torchvision-style ResNet-50 (stride on the 3x3 conv), 224x224 input
RESNET50 = _resnet50_layers()


def layers_of(model) -> tuple:
    if hasattr(model, "parametric_layers"):
        return tuple(
            FlopsLayer(layer.n_in, layer.n_out, p)
            for layer, p in zip(model.parametric_layers(), model.output_positions())
        )
    return tuple(model)


def active_counts(layers, sparsity, assignment="erdos_renyi"):
    dims = [(layer.n_in, layer.n_out) for layer in layers]
    if assignment == "uniform":
        return uniform_layer_counts(dims, sparsity)
    return layer_counts(dims, solve_epsilon(dims, sparsity))


def flops_estimate(model, strategy, schedule: PruneGrowSchedule, sparsity, steps, batch=1,
                   assignment="erdos_renyi") -> FlopsEstimate:
    check_strategy(strategy)
    layers = layers_of(model)
    counts = active_counts(layers, sparsity, assignment)
    base = 0.0
    overhead = 0.0
    inference = 0.0
    for layer, active in zip(layers, counts):
        dense = layer.n_in * layer.n_out
        per_position = layer.positions * batch
        inference += 2.0 * active * layer.positions
        base += 6.0 * active * per_position
        if strategy in GSE_STRATEGIES:
            subset = schedule.gamma * active * (1.0 - active / dense)
            overhead += 2.0 * subset * per_position
            if strategy == GSE_GRABO:
                overhead += (layer.n_in + layer.n_out) * per_position
            elif strategy == GSE_GRAEST:
                overhead += 2.0 * (layer.n_in + layer.n_out) * per_position
        elif strategy == RIGL_DENSE:
            overhead += 2.0 * (dense - active) * per_position
    rounds = schedule.rounds_within(steps)
    return FlopsEstimate(steps * base + rounds * overhead, inference, base, overhead, rounds)


def gse_rigl_ratio(model, schedule, sparsity, steps, strategy="gse_uniform", assignment="erdos_renyi") -> float:
    gse = flops_estimate(model, strategy, schedule, sparsity, steps, assignment=assignment)
    rigl = flops_estimate(model, RIGL_DENSE, schedule, sparsity, steps, assignment=assignment)
    return gse.train_flops / rigl.train_flops


def resnet50_schedule(gamma=1.0, steps=32_000) -> PruneGrowSchedule:
    """RigL's ImageNet setting: updates every 100 steps, amortized over training."""
    return PruneGrowSchedule(T=100, T_end=steps, alpha=0.3, gamma=gamma)
