"""Forward and backward passes over sparse parameters.

Hidden states are ``units x batch`` for feedforward parts and
``channels x batch x height x width`` for convolutional parts.  Weights are
only ever touched through the sparse kernels; no dense weight or dense
weight-gradient matrix is created.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..sparse_core import ConnectionSet, gather_connection_grads, spmm, spmm_transposed
from . import conv as _conv
from .layers import AVGPOOL, CONV2D, FEEDFORWARD, FLATTEN, RELU, ModelSpec
from .losses import cross_entropy


@dataclass
class LayerParams:
    """Sparse weights plus the dense bias of one parametric layer."""

    conn: ConnectionSet
    bias: np.ndarray | None
    bias_momentum: np.ndarray | None = None

    def __post_init__(self):
        if self.bias is not None and self.bias_momentum is None:
            self.bias_momentum = np.zeros_like(self.bias)

    def copy(self) -> "LayerParams":
        return LayerParams(
            self.conn.copy(),
            None if self.bias is None else self.bias.copy(),
            None if self.bias_momentum is None else self.bias_momentum.copy(),
        )


@dataclass
class ActivationCache:
    """Per-batch activations and output gradients.

    ``inputs[p]`` and ``deltas[p]`` are indexed by parametric layer and are
    always 2-d: ``h_{l-1}`` is ``n_in x B'`` and ``delta_l`` is ``n_out x B'``
    where ``B'`` is the batch size times the number of output positions (1
    for feedforward layers).
    """

    batch_size: int
    outputs: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    input_shapes: list = field(default_factory=list)

    def layer_view(self, p):
        if not self.deltas or self.deltas[p] is None:
            raise RuntimeError("backward has not filled this cache")
        return self.inputs[p], self.deltas[p]


@dataclass
class Gradients:
    weights: list
    biases: list
    loss: float


def init_weights(conn: ConnectionSet, rng: np.random.Generator) -> ConnectionSet:
    """Fill weights with N(0, 2/fan_in) where fan_in counts active inputs per unit."""
    fan_in = np.maximum(conn.fan_in(), 1)
    std = np.sqrt(2.0 / fan_in)[conn.out_idx]
    conn.weights[:] = rng.standard_normal(len(conn)) * std
    conn.momentum[:] = 0.0
    return conn


def init_params(model: ModelSpec, connection_sets, rng, dtype=np.float64) -> list[LayerParams]:
    params = []
    for layer, conn in zip(model.parametric_layers(), connection_sets):
        if (conn.n_in, conn.n_out) != (layer.n_in, layer.n_out):
            raise ValueError("connection set does not match layer dimensions")
        conn = init_weights(conn.astype(dtype), rng)
        bias = np.zeros(layer.n_out, dtype=dtype) if layer.has_bias else None
        params.append(LayerParams(conn, bias))
    return params


def _to_internal(model: ModelSpec, x):
    x = np.asarray(x)
    if x.shape[1:] != model.input_shape:
        if len(model.input_shape) == 1 and x.ndim >= 2 and int(np.prod(x.shape[1:])) == model.input_shape[0]:
            return np.ascontiguousarray(x.reshape(x.shape[0], -1).T)
        raise ValueError(f"batch shape {x.shape[1:]} does not match model input {model.input_shape}")
    if x.ndim == 2:
        return np.ascontiguousarray(x.T)
    return np.ascontiguousarray(x.transpose(1, 0, 2, 3))


def forward(model: ModelSpec, params, x, dtype=None):
    """Return ``(logits, cache)``; logits are ``classes x batch``."""
    state = _to_internal(model, x)
    if dtype is not None:
        state = state.astype(dtype, copy=False)
    cache = ActivationCache(batch_size=state.shape[1])
    p = 0
    for layer in model.layers:
        if layer.kind == FEEDFORWARD:
            lp = params[p]
            cache.inputs.append(state)
            cache.input_shapes.append(state.shape)
            state = spmm(lp.conn, state)
            if lp.bias is not None:
                state += lp.bias[:, None]
            p += 1
        elif layer.kind == CONV2D:
            lp = params[p]
            cache.input_shapes.append(state.shape)
            state, patches = _conv.conv_forward(lp.conn, lp.bias, state, layer.kernel, layer.stride, layer.padding)
            cache.inputs.append(patches)
            p += 1
        elif layer.kind == RELU:
            state = np.maximum(state, 0.0)
        elif layer.kind == AVGPOOL:
            state = _conv.avgpool_forward(state, layer.pool)
        elif layer.kind == FLATTEN:
            c, b, h, w = state.shape
            state = np.ascontiguousarray(state.transpose(0, 2, 3, 1)).reshape(c * h * w, b)
        cache.outputs.append(state)
    return state, cache


def backward(model: ModelSpec, params, cache: ActivationCache, labels, input_grad=False):
    """Backpropagate the smoothed cross-entropy of the cached forward pass.

    Fills ``cache.deltas`` and returns :class:`Gradients` whose weight
    gradients are aligned with each layer's active connections.  With
    ``input_grad=True`` the gradient w.r.t. the network input is returned as
    a second value.
    """
    if not cache.outputs:
        raise RuntimeError("missing forward cache")
    loss, grad = cross_entropy(cache.outputs[-1], labels, model.label_smoothing)
    n_param = len(model.parametric)
    weight_grads = [None] * n_param
    bias_grads = [None] * n_param
    cache.deltas = [None] * n_param
    p = n_param
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        first = i == 0
        if layer.kind == FEEDFORWARD:
            p -= 1
            lp = params[p]
            cache.deltas[p] = grad
            weight_grads[p] = gather_connection_grads(lp.conn.in_idx, lp.conn.out_idx, cache.inputs[p], grad)
            bias_grads[p] = grad.sum(axis=1) if lp.bias is not None else None
            if not first or input_grad:
                grad = spmm_transposed(lp.conn, grad)
        elif layer.kind == CONV2D:
            p -= 1
            lp = params[p]
            delta = grad.reshape(layer.n_out, -1)
            cache.deltas[p] = delta
            weight_grads[p] = gather_connection_grads(lp.conn.in_idx, lp.conn.out_idx, cache.inputs[p], delta)
            bias_grads[p] = delta.sum(axis=1) if lp.bias is not None else None
            if not first or input_grad:
                grad = _conv.conv_input_grad(
                    lp.conn, delta, cache.input_shapes[p], layer.kernel, layer.stride, layer.padding
                )
        elif layer.kind == RELU:
            grad = grad * (cache.outputs[i] > 0)
        elif layer.kind == AVGPOOL:
            grad = _conv.avgpool_backward(grad, layer.pool)
        elif layer.kind == FLATTEN:
            if i > 0:
                c, b, h, w = cache.outputs[i - 1].shape
            else:
                (c, h, w), b = model.input_shape, cache.batch_size
            grad = np.ascontiguousarray(grad.reshape(c, h, w, b).transpose(0, 3, 1, 2))
    grads = Gradients(weight_grads, bias_grads, loss)
    if input_grad:
        if grad.ndim == 2:
            return grads, grad.T
        return grads, grad.transpose(1, 0, 2, 3)
    return grads


def predict(model: ModelSpec, params, x, batch_size=1000) -> np.ndarray:
    preds = []
    for start in range(0, len(x), batch_size):
        logits, _ = forward(model, params, x[start:start + batch_size])
        preds.append(np.argmax(logits, axis=0))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def accuracy(model: ModelSpec, params, x, labels, batch_size=1000) -> float:
    if len(labels) == 0:
        return float("nan")
    return float(np.mean(predict(model, params, x, batch_size) == np.asarray(labels)))
