import numpy as np
import pytest

from diffpower import nn


def mse_loss(target):
    def loss_fn(y):
        d = y - target
        return float(np.mean(d * d)), 2.0 * d / d.size
    return loss_fn


def test_identity_single_layer_is_identity_map():
    net = nn.DenseNet(layer_dims=(3, 3), params=np.zeros(12),
                      hidden_activation="identity")
    net.weights[0][:] = np.eye(3)
    x = np.array([0.3, -1.2, 4.0])
    assert np.array_equal(nn.forward(net, x), x)


def test_zero_weights_return_bias():
    net = nn.DenseNet(layer_dims=(4, 2), params=np.zeros(10),
                      hidden_activation="identity")
    net.biases[0][:] = [5.0, -1.0]
    for x in (np.zeros(4), np.ones(4), np.arange(4.0)):
        assert np.array_equal(nn.forward(net, x), [5.0, -1.0])


def test_two_layer_hand_computation():
    net = nn.DenseNet(layer_dims=(2, 2, 1), params=np.zeros(9),
                      hidden_activation="identity")
    w1 = np.array([[0.1, -0.2], [0.3, 0.05]])
    b1 = np.array([0.01, -0.02])
    w2 = np.array([[0.7], [-0.4]])
    b2 = np.array([0.003])
    net.weights[0][:] = w1
    net.biases[0][:] = b1
    net.weights[1][:] = w2
    net.biases[1][:] = b2
    x = np.array([0.5, -1.5])
    expected = (x @ w1 + b1) @ w2 + b2
    assert nn.forward(net, x) == pytest.approx(expected, abs=1e-12)


def test_silu_forward_matches_reference():
    net = nn.DenseNet(layer_dims=(2, 2, 2), params=np.zeros(12),
                      hidden_activation="silu")
    net.weights[0][:] = np.eye(2)
    net.weights[1][:] = np.eye(2)
    x = np.array([1.5, -0.7])
    ref = x / (1.0 + np.exp(-x))
    assert nn.forward(net, x) == pytest.approx(ref, abs=1e-12)


def test_linear_net_input_gradient_is_weight_transpose_action():
    rng = np.random.default_rng(0)
    net = nn.DenseNet(layer_dims=(3, 2), params=rng.standard_normal(8),
                      hidden_activation="identity")
    upstream = rng.standard_normal(2)
    _, dx = nn.backward(net, rng.standard_normal(3), upstream)
    assert dx == pytest.approx(net.weights[0] @ upstream, abs=1e-12)


def test_zero_upstream_gives_zero_gradients():
    rng = np.random.default_rng(1)
    net = nn.DenseNet.create((5, 8, 4), rng)
    grads, dx = nn.backward(net, rng.standard_normal(5), np.zeros(4))
    assert np.all(grads == 0.0) and np.all(dx == 0.0)


def finite_difference_grad(net, loss_fn, x, h=1e-5):
    out = np.empty_like(net.params)
    for i in range(net.params.size):
        orig = net.params[i]
        net.params[i] = orig + h
        hi, _ = loss_fn(nn.forward(net, x))
        net.params[i] = orig - h
        lo, _ = loss_fn(nn.forward(net, x))
        net.params[i] = orig
        out[i] = (hi - lo) / (2.0 * h)
    return out


def test_backward_matches_central_differences():
    rng = np.random.default_rng(2)
    net = nn.DenseNet.create((4, 10, 10, 3), rng)
    x = rng.standard_normal(4)
    loss_fn = mse_loss(rng.standard_normal(3))
    _, gy = loss_fn(nn.forward(net, x))
    analytic, _ = nn.backward(net, x, gy)
    fd = finite_difference_grad(net, loss_fn, x)
    rel = np.abs(analytic - fd) / np.maximum.reduce(
        [np.abs(analytic), np.abs(fd), np.full_like(fd, 1e-8)])
    assert rel.max() < 1e-4


def test_backward_batch_agrees_with_sum_of_singles():
    rng = np.random.default_rng(3)
    net = nn.DenseNet.create((3, 6, 2), rng)
    xs = rng.standard_normal((5, 3))
    ups = rng.standard_normal((5, 2))
    batch_grads, batch_dx = nn.backward(net, xs, ups)
    acc = np.zeros_like(net.params)
    for i in range(5):
        g, dx = nn.backward(net, xs[i], ups[i])
        acc += g
        assert dx == pytest.approx(batch_dx[i], rel=1e-10, abs=1e-12)
    assert batch_grads == pytest.approx(acc, rel=1e-9, abs=1e-12)


def test_adam_zero_gradient_keeps_params():
    params = np.array([1.0, -2.0, 3.0])
    state = nn.AdamState.for_params(params, learning_rate=0.1)
    nn.adam_step(state, params, np.zeros(3))
    assert params.tolist() == [1.0, -2.0, 3.0]
    assert state.step_count == 1


def test_adam_first_step_is_signed_learning_rate():
    params = np.zeros(3)
    g = np.array([0.5, -2.0, 1e-3])
    state = nn.AdamState.for_params(params, learning_rate=0.01)
    nn.adam_step(state, params, g)
    # m_hat = g, v_hat = g^2 -> update = -lr * g / (|g| + eps)
    assert params == pytest.approx(-0.01 * np.sign(g), rel=1e-4)


def test_adam_constant_gradient_update_magnitude_approaches_lr():
    params = np.zeros(2)
    g = np.array([0.3, -0.7])
    state = nn.AdamState.for_params(params, learning_rate=0.05)
    prev = params.copy()
    for _ in range(200):
        prev = params.copy()
        nn.adam_step(state, params, g)
    last_update = params - prev
    assert np.abs(last_update) == pytest.approx(0.05, rel=1e-6)
    assert np.sign(last_update) == pytest.approx(-np.sign(g))


def test_grad_check_passes_on_denoiser_shaped_net():
    rng = np.random.default_rng(4)
    net = nn.DenseNet.create((56, 128, 128, 128, 20), rng)
    x = rng.standard_normal(56)
    assert nn.grad_check(net, mse_loss(rng.standard_normal(20)), x, 1e-4, rng=rng)


def test_grad_check_catches_corrupted_backward(monkeypatch):
    rng = np.random.default_rng(5)
    net = nn.DenseNet.create((6, 12, 4), rng)
    true_backward = nn.backward

    def corrupted(net_, x_, upstream_):
        grads, dx = true_backward(net_, x_, upstream_)
        grads = grads.copy()
        grads[3] *= 2.0
        return grads, dx

    monkeypatch.setattr(nn, "backward", corrupted)
    x = rng.standard_normal(6)
    assert not nn.grad_check(net, mse_loss(rng.standard_normal(4)), x, 1e-4,
                             rng=rng, num_components=net.params.size)


def test_grad_check_linear_quadratic_is_tight():
    rng = np.random.default_rng(6)
    net = nn.DenseNet(layer_dims=(3, 2), params=rng.standard_normal(8),
                      hidden_activation="identity")
    x = rng.standard_normal(3)
    assert nn.grad_check(net, mse_loss(np.zeros(2)), x, 1e-8)


def test_forward_deterministic_bit_identical():
    rng = np.random.default_rng(7)
    net = nn.DenseNet.create((8, 16, 16, 3), rng)
    x = rng.standard_normal((10, 8))
    a = nn.forward(net, x)
    b = nn.forward(net, x)
    assert np.array_equal(a, b)


def test_shape_validation():
    rng = np.random.default_rng(8)
    net = nn.DenseNet.create((4, 3), rng)
    with pytest.raises(ValueError):
        nn.forward(net, np.zeros(5))
    with pytest.raises(ValueError):
        nn.backward(net, np.zeros(4), np.zeros(4))
    with pytest.raises(ValueError):
        nn.DenseNet(layer_dims=(3,), params=np.zeros(1))
    with pytest.raises(ValueError):
        nn.DenseNet(layer_dims=(3, 2), params=np.zeros(5))
    with pytest.raises(ValueError):
        nn.DenseNet.create((2, 2), rng, hidden_activation="tanh")
    with pytest.raises(ValueError):
        nn.AdamState.for_params(np.zeros(3), beta1=1.0)
