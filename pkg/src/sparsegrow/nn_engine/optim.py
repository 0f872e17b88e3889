"""SGD with momentum and L2 regularization over sparse parameters."""

from __future__ import annotations

import bisect
from dataclasses import dataclass


@dataclass(frozen=True)
class OptimizerState:
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    drop_steps: tuple = ()
    drop_factor: float = 0.1

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        object.__setattr__(self, "drop_steps", tuple(sorted(self.drop_steps)))

    def lr_at(self, step: int) -> float:
        """Piecewise-constant rate; a drop at step ``s`` applies from ``s`` on."""
        return self.lr * self.drop_factor ** bisect.bisect_right(self.drop_steps, step)


def _update(theta, velocity, grad, lr, momentum, weight_decay):
    velocity *= momentum
    velocity += grad
    if weight_decay:
        velocity += weight_decay * theta
    theta -= lr * velocity


def sgd_step(params, grads, opt: OptimizerState, step: int):
    """In-place update ``v <- mu*v + (g + l2*theta); theta <- theta - lr*v``.

    ``params`` is a list of :class:`~sparsegrow.nn_engine.network.LayerParams`
    and ``grads`` the matching :class:`~sparsegrow.nn_engine.network.Gradients`.
    """
    lr = opt.lr_at(step)
    for layer, g_w, g_b in zip(params, grads.weights, grads.biases):
        conn = layer.conn
        if g_w.shape != conn.weights.shape:
            raise ValueError("gradient is not aligned with the active connections")
        _update(conn.weights, conn.momentum, g_w, lr, opt.momentum, opt.weight_decay)
        if layer.bias is not None:
            _update(layer.bias, layer.bias_momentum, g_b, lr, opt.momentum, opt.weight_decay)
    return params
