"""Convolution as a batched feedforward layer.

Feature maps are laid out ``(channels, batch, height, width)``.  ``im2col``
turns them into a ``(channels*k*k, batch*out_h*out_w)`` patch matrix, so a
sparse convolution is just ``spmm`` with an effective batch of
``batch * out_h * out_w``.  Row ``c*k*k + i*k + j`` of the patch matrix holds
input channel ``c`` at filter offset ``(i, j)``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..sparse_core import ConnectionSet, spmm, spmm_transposed
from .layers import conv_output_size


def im2col(x, kernel, stride=1, padding=0):
    c, b, h, w = x.shape
    out_h = conv_output_size(h, kernel, stride, padding)
    out_w = conv_output_size(w, kernel, stride, padding)
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(x, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = windows.transpose(0, 4, 5, 1, 2, 3)
    return np.ascontiguousarray(cols).reshape(c * kernel * kernel, b * out_h * out_w)


def col2im(cols, x_shape, kernel, stride=1, padding=0):
    """Adjoint of :func:`im2col`: scatter-add patches back to a feature map."""
    c, b, h, w = x_shape
    out_h = conv_output_size(h, kernel, stride, padding)
    out_w = conv_output_size(w, kernel, stride, padding)
    cols = cols.reshape(c, kernel, kernel, b, out_h, out_w)
    out = np.zeros((c, b, h + 2 * padding, w + 2 * padding), dtype=cols.dtype)
    for i in range(kernel):
        for j in range(kernel):
            out[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += cols[:, i, j]
    if padding:
        out = out[:, :, padding:-padding, padding:-padding]
    return np.ascontiguousarray(out)


def conv_forward(conn: ConnectionSet, bias, x, kernel, stride=1, padding=0):
    """Sparse convolution; returns the output map and the patch matrix."""
    c, b, h, w = x.shape
    patches = im2col(x, kernel, stride, padding)
    z = spmm(conn, patches)
    if bias is not None:
        z += bias[:, None]
    out_h = conv_output_size(h, kernel, stride, padding)
    out_w = conv_output_size(w, kernel, stride, padding)
    return z.reshape(conn.n_out, b, out_h, out_w), patches


def conv_input_grad(conn: ConnectionSet, delta, x_shape, kernel, stride=1, padding=0):
    """Gradient w.r.t. the conv input given ``delta`` of shape ``(n_out, batch*positions)``."""
    return col2im(spmm_transposed(conn, delta), x_shape, kernel, stride, padding)


def avgpool_forward(x, size):
    c, b, h, w = x.shape
    return x.reshape(c, b, h // size, size, w // size, size).mean(axis=(3, 5))


def avgpool_backward(grad, size):
    return np.repeat(np.repeat(grad, size, axis=2), size, axis=3) / (size * size)
