import tracemalloc

import mpmath
import numpy as np
import pytest
from oracles import central_differences, dense_masked_mlp_train, naive_conv

from sparsegrow.nn_engine import (
    ActivationCache,
    Gradients,
    LayerParams,
    ModelSpec,
    OptimizerState,
    backward,
    conv2d,
    conv_forward,
    cross_entropy,
    feedforward,
    flatten,
    forward,
    im2col,
    init_params,
    init_weights,
    mlp,
    relu,
    sgd_step,
    small_cnn,
)
from sparsegrow.sparse_core import ConnectionSet


def random_conn(rng, n_in, n_out, density, dtype=np.float64):
    count = max(1, int(round(density * n_in * n_out)))
    keys = rng.choice(n_in * n_out, size=count, replace=False)
    return ConnectionSet.from_pairs(n_in, n_out, keys % n_in, keys // n_in,
                                    weights=rng.standard_normal(count), dtype=dtype)


def random_params(model, rng, density=0.6):
    conns = [random_conn(rng, layer.n_in, layer.n_out, density) for layer in model.parametric_layers()]
    params = init_params(model, conns, rng)
    for lp in params:
        if lp.bias is not None:
            lp.bias[:] = 0.1 * rng.standard_normal(lp.bias.size)
    return params


def max_rel_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-8))


def check_gradients(model, params, x, labels):
    _, cache = forward(model, params, x)
    grads = backward(model, params, cache, labels)

    def loss():
        logits, _ = forward(model, params, x)
        return cross_entropy(logits, labels, model.label_smoothing)[0]

    for lp, gw, gb in zip(params, grads.weights, grads.biases):
        assert max_rel_error(central_differences(loss, lp.conn.weights), gw) < 1e-4
        if lp.bias is not None:
            assert max_rel_error(central_differences(loss, lp.bias), gb) < 1e-4


class TestLayers:
    def test_mlp_shapes(self):
        model = mlp([784, 256, 256, 10])
        assert [(l.n_in, l.n_out) for l in model.parametric_layers()] == [(784, 256), (256, 256), (256, 10)]
        assert model.output_positions() == [1, 1, 1]

    def test_cnn_shapes(self):
        model = small_cnn((3, 32, 32), 10)
        layers = model.parametric_layers()
        assert (layers[0].n_in, layers[0].n_out) == (27, 32)
        assert (layers[1].n_in, layers[1].n_out) == (288, 64)
        assert layers[2].n_in == 64 * 8 * 8
        assert model.output_positions()[:2] == [32 * 32, 16 * 16]

    def test_geometry_mismatch(self):
        with pytest.raises(ValueError):
            ModelSpec([conv2d(1, 2, 5), flatten(), feedforward(2, 2)], (1, 3, 3), 2)

    def test_composition_mismatch(self):
        with pytest.raises(ValueError):
            ModelSpec([feedforward(4, 3), feedforward(5, 2)], (4,), 2)


class TestInit:
    def test_fan_in_two_gives_unit_std(self):
        rng = np.random.default_rng(0)
        # every output unit has exactly two inputs
        n_out = 5000
        conn = ConnectionSet.from_pairs(2, n_out, np.tile([0, 1], n_out), np.repeat(np.arange(n_out), 2))
        init_weights(conn, rng)
        assert np.std(conn.weights) == pytest.approx(1.0, rel=0.03)

    def test_per_unit_variance(self):
        rng = np.random.default_rng(1)
        conn = random_conn(rng, 400, 50, 0.5)
        init_weights(conn, rng)
        fan = conn.fan_in()
        for b in range(conn.n_out):
            w = conn.weights[conn.out_idx == b]
            expected = 2.0 / fan[b]
            se = expected * np.sqrt(2.0 / w.size)
            assert abs(np.var(w) - expected) < 4 * se + 1e-12
        assert np.all(conn.momentum == 0)

    def test_pooled_variance_within_ten_percent(self):
        rng = np.random.default_rng(2)
        conn = random_conn(rng, 200, 100, 0.5)
        init_weights(conn, rng)
        z = conn.weights / np.sqrt(2.0 / conn.fan_in()[conn.out_idx])
        assert np.var(z) == pytest.approx(1.0, rel=0.1)

    def test_biases_start_at_zero(self):
        model = mlp([4, 3, 2])
        rng = np.random.default_rng(0)
        conns = [random_conn(rng, 4, 3, 0.5), random_conn(rng, 3, 2, 0.5)]
        params = init_params(model, conns, rng)
        assert all(np.all(p.bias == 0) for p in params)


class TestForward:
    def test_zero_weights_give_zero_logits(self):
        model = mlp([6, 5, 3])
        rng = np.random.default_rng(0)
        params = random_params(model, rng)
        for lp in params:
            lp.conn.weights[:] = 0
            lp.bias[:] = 0
        logits, _ = forward(model, params, rng.standard_normal((4, 6)))
        assert logits.shape == (3, 4)
        assert np.all(logits == 0)

    def test_single_layer_matches_masked_dense(self):
        model = mlp([7, 3])
        rng = np.random.default_rng(3)
        params = random_params(model, rng)
        x = rng.standard_normal((5, 7))
        logits, _ = forward(model, params, x)
        expected = params[0].conn.to_dense() @ x.T + params[0].bias[:, None]
        np.testing.assert_allclose(logits, expected, rtol=1e-12)

    def test_shape_mismatch(self):
        model = mlp([6, 3])
        params = random_params(model, np.random.default_rng(0))
        with pytest.raises(ValueError):
            forward(model, params, np.zeros((2, 5)))

    def test_backward_needs_cache(self):
        model = mlp([6, 3])
        params = random_params(model, np.random.default_rng(0))
        with pytest.raises(RuntimeError):
            backward(model, params, ActivationCache(batch_size=2), np.array([0, 1]))


class TestConvolution:
    def test_one_by_one_is_reshape(self):
        x = np.arange(2 * 3 * 4 * 5, dtype=float).reshape(2, 3, 4, 5)
        cols = im2col(x, 1)
        np.testing.assert_array_equal(cols, x.reshape(2, -1))

    def test_three_by_three_on_four_by_four(self):
        x = np.arange(2 * 16, dtype=float).reshape(2, 1, 4, 4)
        cols = im2col(x, 3)
        assert cols.shape == (2 * 9, 4)
        for c in range(2):
            for i in range(3):
                for j in range(3):
                    for p, (y, xx) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
                        assert cols[c * 9 + i * 3 + j, p] == x[c, 0, y + i, xx + j]

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1)])
    def test_forward_matches_direct_convolution(self, stride, padding):
        rng = np.random.default_rng(stride * 10 + padding)
        c_in, c_out, k = 3, 4, 3
        conn = random_conn(rng, c_in * k * k, c_out, 0.5)
        bias = rng.standard_normal(c_out)
        x = rng.standard_normal((2, c_in, 7, 7))
        out, _ = conv_forward(conn, bias, np.ascontiguousarray(x.transpose(1, 0, 2, 3)), k, stride, padding)
        weight = conn.to_dense().reshape(c_out, c_in, k, k)
        expected = naive_conv(x, weight, bias, stride, padding)
        np.testing.assert_allclose(out.transpose(1, 0, 2, 3), expected, atol=1e-6)

    def test_backward_matches_direct_convolution(self):
        rng = np.random.default_rng(7)
        model = ModelSpec([conv2d(2, 3, 3, stride=2, padding=1), flatten(), feedforward(3 * 3 * 3, 4)], (2, 5, 5), 4)
        params = random_params(model, rng)
        x = rng.standard_normal((3, 2, 5, 5))
        labels = np.array([0, 3, 1])
        _, cache = forward(model, params, x)
        grads, x_grad = backward(model, params, cache, labels, input_grad=True)

        def loss():
            logits, _ = forward(model, params, x)
            return cross_entropy(logits, labels)[0]

        np.testing.assert_allclose(x_grad, central_differences(loss, x), atol=1e-6)


class TestLoss:
    def test_uniform_logits(self):
        loss, _ = cross_entropy(np.zeros((7, 3)), np.array([0, 4, 6]))
        assert loss == pytest.approx(np.log(7), rel=1e-12)

    def test_confident_correct_logit(self):
        logits = np.array([[60.0], [0.0], [0.0]])
        loss, grad = cross_entropy(logits, np.array([0]))
        assert loss < 1e-20
        assert np.max(np.abs(grad)) < 1e-20

    def test_smoothed_optimum_has_zero_gradient(self):
        c, eps = 5, 0.1
        target = np.full(c, eps / c)
        target[2] += 1 - eps
        logits = np.log(target)[:, None]
        _, grad = cross_entropy(logits, np.array([2]), eps)
        assert np.max(np.abs(grad)) < 1e-15

    def test_matches_high_precision(self):
        rng = np.random.default_rng(11)
        logits = rng.standard_normal((6, 4)) * 3
        labels = np.array([1, 5, 0, 2])
        eps = 0.1
        loss, _ = cross_entropy(logits, labels, eps)
        mpmath.mp.dps = 50
        total = mpmath.mpf(0)
        for j in range(4):
            col = [mpmath.mpf(float(v)) for v in logits[:, j]]
            log_z = mpmath.log(mpmath.fsum(mpmath.exp(v) for v in col))
            for i in range(6):
                y = mpmath.mpf(eps) / 6 + (1 - mpmath.mpf(eps) if i == labels[j] else 0)
                total -= y * (col[i] - log_z)
        assert abs(loss - float(total / 4)) < 1e-10

    def test_gradient_columns_sum_to_zero(self):
        rng = np.random.default_rng(5)
        _, grad = cross_entropy(rng.standard_normal((10, 8)), rng.integers(0, 10, 8), 0.1)
        np.testing.assert_allclose(grad.sum(axis=0), 0.0, atol=1e-15)

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            cross_entropy(np.zeros((3, 2)), np.array([0, 3]))


class TestGradientCheck:
    def test_two_two_two_mlp(self):
        rng = np.random.default_rng(0)
        model = mlp([2, 2, 2])
        conns = [ConnectionSet.from_pairs(2, 2, [0, 1, 0, 1], [0, 0, 1, 1], rng.standard_normal(4)) for _ in range(2)]
        params = init_params(model, conns, rng)
        for lp in params:
            lp.bias[:] = rng.standard_normal(2) * 0.1
        check_gradients(model, params, rng.standard_normal((3, 2)), np.array([0, 1, 1]))

    @pytest.mark.parametrize("seed", range(3))
    def test_random_sparse_mlp(self, seed):
        rng = np.random.default_rng(seed)
        model = mlp([12, 9, 5], label_smoothing=0.1)
        check_gradients(model, random_params(model, rng, 0.4), rng.standard_normal((6, 12)), rng.integers(0, 5, 6))

    def test_conv_model(self):
        rng = np.random.default_rng(4)
        model = ModelSpec([conv2d(2, 3, 3, padding=1), relu(), flatten(), feedforward(3 * 4 * 4, 4)], (2, 4, 4), 4)
        check_gradients(model, random_params(model, rng, 0.5), rng.standard_normal((2, 2, 4, 4)), np.array([1, 3]))


class TestSgd:
    def _single(self, weights, grad, bias_grad=0.0):
        conn = ConnectionSet.from_pairs(1, len(weights), np.zeros(len(weights)), np.arange(len(weights)), weights)
        return [LayerParams(conn, np.zeros(len(weights)))], Gradients([np.asarray(grad, float)],
                                                                       [np.full(len(weights), bias_grad)], 0.0)

    def test_plain_descent(self):
        params, grads = self._single([1.0, -2.0], [0.5, 0.25])
        sgd_step(params, grads, OptimizerState(lr=0.1, momentum=0.0, weight_decay=0.0), 1)
        np.testing.assert_array_equal(params[0].conn.weights, [1.0 - 0.05, -2.0 - 0.025])

    def test_zero_gradient_is_noop(self):
        params, grads = self._single([1.5, -0.5], [0.0, 0.0])
        sgd_step(params, grads, OptimizerState(lr=0.1, momentum=0.9, weight_decay=0.0), 1)
        np.testing.assert_array_equal(params[0].conn.weights, [1.5, -0.5])

    def test_three_step_momentum_trace(self):
        lr, mu, wd = 0.1, 0.9, 0.01
        params, _ = self._single([1.0], [0.0])
        gs = [0.5, -0.25, 1.0]
        for step, g in enumerate(gs, start=1):
            sgd_step(params, Gradients([np.array([g])], [np.array([0.0])], 0.0), OptimizerState(lr, mu, wd), step)
        th0 = 1.0
        v1 = gs[0] + wd * th0
        th1 = th0 - lr * v1
        v2 = mu * v1 + gs[1] + wd * th1
        th2 = th1 - lr * v2
        v3 = mu * v2 + gs[2] + wd * th2
        th3 = th2 - lr * v3
        assert params[0].conn.weights[0] == th3
        assert params[0].conn.momentum[0] == v3

    def test_learning_rate_drops(self):
        opt = OptimizerState(lr=0.1, drop_steps=(10, 20))
        assert [opt.lr_at(s) for s in (1, 9, 10, 19, 20)] == pytest.approx([0.1, 0.1, 0.01, 0.01, 0.001])

    @pytest.mark.parametrize("kwargs", [{"lr": 0}, {"momentum": 1.0}, {"weight_decay": -1}])
    def test_invalid_state(self, kwargs):
        with pytest.raises(ValueError):
            OptimizerState(**kwargs)


class TestSparseDenseEquivalence:
    @pytest.mark.parametrize("seed", range(3))
    def test_ten_steps(self, seed):
        rng = np.random.default_rng(seed)
        model = mlp([10, 8, 4])
        params = random_params(model, rng, 0.3)
        weights = [lp.conn.to_dense() for lp in params]
        masks = [_mask(lp.conn) for lp in params]
        biases = [lp.bias.copy() for lp in params]
        x = rng.standard_normal((6, 10))
        labels = rng.integers(0, 4, 6)
        opt = OptimizerState(lr=0.05, momentum=0.9, weight_decay=1e-3)
        for step in range(1, 11):
            _, cache = forward(model, params, x)
            sgd_step(params, backward(model, params, cache, labels), opt, step)
        dense_w, dense_b = dense_masked_mlp_train(weights, masks, biases, x, labels, 10, 0.05, 0.9, 1e-3)
        for lp, w, b in zip(params, dense_w, dense_b):
            np.testing.assert_allclose(lp.conn.weights, w[lp.conn.out_idx, lp.conn.in_idx], rtol=1e-5, atol=1e-12)
            np.testing.assert_allclose(lp.bias, b, rtol=1e-5, atol=1e-12)


def _mask(conn):
    mask = np.zeros((conn.n_out, conn.n_in), dtype=bool)
    mask[conn.out_idx, conn.in_idx] = True
    return mask


class TestMemory:
    def test_no_dense_allocation(self):
        rng = np.random.default_rng(0)
        n = 3000
        model = mlp([n, n, 10])
        params = random_params(model, rng, 0.002)
        x = rng.standard_normal((4, n))
        labels = np.array([0, 1, 2, 3])
        forward(model, params, x)
        tracemalloc.start()
        _, cache = forward(model, params, x)
        backward(model, params, cache, labels)
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        # one dense float64 n x n matrix would be 72 MB
        assert peak < n * n * 8 / 20
