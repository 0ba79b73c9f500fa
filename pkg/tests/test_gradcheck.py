"""Central-difference verification of every differentiable primitive.

Each op is wrapped into a scalar loss through a fixed random weighting so
upstream gradients are non-uniform; checks run in float64 where the 1e-4
tolerance is meaningful.  Inputs are drawn away from ReLU kinks.
"""

import numpy as np
import pytest

from engagekit import autodiff as ad
from engagekit.autodiff import BnState, Tensor, constant, parameter
from engagekit.facegraph import build_adjacency, normalize_adjacency
from engagekit.gradcheck import grad_check, relative_error
from engagekit.model import build_network
from engagekit.optim import adam_state_for, adam_step, zero_grads


def _weighted_sum(t: Tensor, coeff: np.ndarray) -> Tensor:
    """Scalar projection sum(coeff * t); linear, so it adds no curvature."""
    c = np.asarray(coeff, dtype=t.data.dtype)

    def backward(g):
        if not t.requires_grad:
            return
        contrib = (c * g).astype(t.data.dtype)
        if t.grad is None:
            t.grad = contrib.copy()
        else:
            t.grad += contrib

    return Tensor(np.asarray((t.data * c).sum(), dtype=t.data.dtype),
                  t.requires_grad, (t,), backward)


def _coeff(rng, shape):
    return rng.normal(size=shape)


def test_linear_function_error_below_1e10():
    # loss is linear in the parameters, so central differences are exact
    # up to round-off
    rng = np.random.default_rng(0)
    x = constant(rng.normal(size=(4, 3)))
    w = parameter(rng.normal(size=(3, 2)))
    b = parameter(rng.normal(size=2))
    c = _coeff(rng, (4, 2))

    report = grad_check(lambda: _weighted_sum(ad.linear(x, w, b), c),
                        {"w": w, "b": b}, samples_per_param=6)
    assert report.max_rel_error < 1e-10


def test_spatial_unit_gradients():
    graph = build_adjacency([(0, 1, 2), (1, 2, 3), (2, 3, 4)], 5)
    norm = normalize_adjacency(graph)
    rng = np.random.default_rng(1)
    x = parameter(rng.normal(size=(2, 3, 4, 5)))
    w = parameter(rng.normal(size=(3, 4)))
    b = parameter(rng.normal(size=4))
    m = parameter(rng.normal(size=(5, 5)))
    c = _coeff(rng, (2, 4, 4, 5))

    report = grad_check(
        lambda: _weighted_sum(ad.spatial_unit(x, w, b, m, norm), c),
        {"x": x, "w": w, "b": b, "m": m})
    assert report.ok(1e-4), report.per_param


@pytest.mark.parametrize("stride", [1, 2])
def test_temporal_conv_gradients(stride):
    rng = np.random.default_rng(2 + stride)
    x = parameter(rng.normal(size=(2, 3, 7, 4)))
    w = parameter(rng.normal(size=(5, 3, 3)))
    b = parameter(rng.normal(size=5))
    t_out = (7 + 2 * 1 - 3) // stride + 1
    c = _coeff(rng, (2, 5, t_out, 4))

    report = grad_check(
        lambda: _weighted_sum(ad.temporal_conv(x, w, b, stride=stride), c),
        {"x": x, "w": w, "b": b})
    assert report.ok(1e-4), report.per_param


@pytest.mark.parametrize("axes,pshape", [
    ((0, 2, 3), (1, 3, 1, 1)),
    ((0, 2), (1, 3, 1, 4)),
])
def test_batch_norm_gradients(axes, pshape):
    rng = np.random.default_rng(5)
    x = parameter(rng.normal(size=(4, 3, 6, 4)))
    gamma = parameter(rng.normal(size=pshape) + 1.5)
    beta = parameter(rng.normal(size=pshape))
    c = _coeff(rng, (4, 3, 6, 4))

    def loss():
        state = BnState(pshape, dtype=np.float64)  # fresh stats every call
        return _weighted_sum(
            ad.batch_norm(x, gamma, beta, state, axes=axes, training=True), c)

    report = grad_check(loss, {"x": x, "gamma": gamma, "beta": beta})
    assert report.ok(1e-4), report.per_param


def test_batch_norm_eval_mode_gradients():
    rng = np.random.default_rng(6)
    x = parameter(rng.normal(size=(3, 2, 4, 3)))
    gamma = parameter(rng.normal(size=(1, 2, 1, 1)) + 1.0)
    beta = parameter(rng.normal(size=(1, 2, 1, 1)))
    state = BnState((1, 2, 1, 1), dtype=np.float64)
    state.mean += 0.3
    state.var += 0.7
    c = _coeff(rng, (3, 2, 4, 3))

    report = grad_check(
        lambda: _weighted_sum(
            ad.batch_norm(x, gamma, beta, state, axes=(0, 2, 3),
                          training=False), c),
        {"x": x, "gamma": gamma, "beta": beta})
    assert report.ok(1e-4), report.per_param


def test_relu_gradients_away_from_kink():
    rng = np.random.default_rng(7)
    base = rng.normal(size=(3, 4))
    base[np.abs(base) < 0.05] = 0.1  # keep pre-activations off the kink
    x = parameter(base)
    c = _coeff(rng, (3, 4))
    report = grad_check(lambda: _weighted_sum(ad.relu(x), c), {"x": x})
    assert report.ok(1e-4)


def test_dropout_gradients_fixed_mask():
    rng = np.random.default_rng(8)
    x = parameter(rng.normal(size=(4, 6)))
    c = _coeff(rng, (4, 6))

    def loss():
        # recreate the generator so every evaluation sees the same mask
        return _weighted_sum(
            ad.dropout(x, 0.3, np.random.default_rng(99), training=True), c)

    report = grad_check(loss, {"x": x})
    assert report.ok(1e-4)


def test_structural_op_gradients():
    rng = np.random.default_rng(9)
    x = parameter(rng.normal(size=(2, 3, 8, 4)))
    w = parameter(rng.normal(size=(3, 5)))
    b = parameter(rng.normal(size=5))
    c = _coeff(rng, (2, 5, 4, 4))

    def loss():
        h = ad.strided_frames(x, 2)
        h = ad.channel_map(h, w, b)
        return _weighted_sum(h, c)

    report = grad_check(loss, {"x": x, "w": w, "b": b})
    assert report.ok(1e-4)


def test_pool_and_concat_gradients():
    rng = np.random.default_rng(10)
    x = parameter(rng.normal(size=(2, 3, 5, 4)))
    y = parameter(rng.normal(size=(2, 2)))
    c = _coeff(rng, (2, 5))

    def loss():
        return _weighted_sum(ad.concat_cols([ad.global_avg_pool(x), y]), c)

    report = grad_check(loss, {"x": x, "y": y})
    assert report.ok(1e-4)


def test_softmax_cross_entropy_gradients():
    rng = np.random.default_rng(11)
    logits = parameter(rng.normal(size=(6, 4)))
    labels = np.array([0, 1, 2, 3, 1, 2])
    report = grad_check(lambda: ad.softmax_cross_entropy(logits, labels),
                        {"logits": logits}, samples_per_param=10)
    assert report.ok(1e-4)


def test_sigmoid_bce_gradients():
    rng = np.random.default_rng(12)
    logits = parameter(rng.normal(size=(5, 3)))
    targets = (rng.random((5, 3)) > 0.5).astype(np.float64)
    report = grad_check(lambda: ad.sigmoid_bce(logits, targets),
                        {"logits": logits}, samples_per_param=10)
    assert report.ok(1e-4)


def test_full_two_layer_network_miniature():
    """End-to-end tape through a small 2-layer network, N=5, T=8."""
    graph = build_adjacency([(0, 1, 2), (1, 2, 3), (2, 3, 4)], 5)
    net = build_network(graph, k=3, seed=4, channels=(3, 3), in_channels=3,
                       gamma=3, dropout=0.0, strides=(1, 1), dtype=np.float64)
    rng = np.random.default_rng(13)
    x = rng.normal(size=(2, 3, 8, 5))
    labels = np.array([0, 2])

    def loss():
        # train-mode loss uses batch statistics only, so repeated calls
        # agree even though running stats keep updating
        return ad.softmax_cross_entropy(net.forward(x, training=True), labels)

    report = grad_check(loss, net.trainable_params(), samples_per_param=4)
    assert report.ok(1e-4), report.per_param


def test_projection_residual_bias_gradient_is_zero():
    # a residual projection bias feeding train-mode batch norm cannot move
    # the loss; its analytic gradient must be (numerically) zero, and it
    # is excluded from finite-difference sampling
    graph = build_adjacency([(0, 1, 2), (1, 2, 3), (2, 3, 4)], 5)
    net = build_network(graph, k=3, seed=5, channels=(2, 4), in_channels=3,
                       gamma=3, dropout=0.0, strides=(1, 2), dtype=np.float64)
    rng = np.random.default_rng(14)
    x = rng.normal(size=(2, 3, 8, 5))
    labels = np.array([1, 0])

    def loss():
        return ad.softmax_cross_entropy(net.forward(x, training=True), labels)

    params = net.trainable_params()
    report = grad_check(loss, params, samples_per_param=3,
                        exclude=("layer1.res.bias",))
    assert report.ok(1e-4), report.per_param
    zero_grads(params)
    loss().backward()
    np.testing.assert_allclose(params["layer1.res.bias"].grad, 0.0, atol=1e-12)


# ---------------------------------------------------------------------------
# optimizer

def test_adam_zero_gradient_keeps_parameters():
    p = parameter(np.array([1.0, -2.0]))
    params = {"p": p}
    state = adam_state_for(params)
    p.grad = np.zeros(2)
    adam_step(params, state, lr=0.1)
    np.testing.assert_allclose(p.data, [1.0, -2.0], atol=0)
    assert state.step == 1


def test_adam_moments_decay_without_gradient():
    p = parameter(np.zeros(1))
    params = {"p": p}
    state = adam_state_for(params)
    state.m["p"][:] = 1.0
    state.v["p"][:] = 1.0
    p.grad = np.zeros(1)
    adam_step(params, state, lr=0.0)
    np.testing.assert_allclose(state.m["p"], 0.9, atol=1e-15)
    np.testing.assert_allclose(state.v["p"], 0.999, atol=1e-15)


def test_adam_first_step_is_signed_lr():
    p = parameter(np.zeros(3))
    params = {"p": p}
    state = adam_state_for(params)
    p.grad = np.ones(3)
    adam_step(params, state, lr=0.001)
    np.testing.assert_allclose(p.data, -0.001, rtol=1e-6)


def test_adam_frozen_block_untouched():
    frozen = parameter(np.array([5.0]))
    live = parameter(np.array([5.0]))
    params = {"live": live}  # freezing = not handing the block to the optimizer
    state = adam_state_for(params)
    live.grad = np.ones(1)
    frozen.grad = np.ones(1)
    adam_step(params, state, lr=0.001)
    np.testing.assert_allclose(frozen.data, 5.0, atol=0)
    assert live.data[0] != 5.0


def test_relative_error_guard():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1.0, 1.0) == 0.0
    assert relative_error(1e-12, 0.0) < 1e-3  # guarded by the 1e-8 floor
