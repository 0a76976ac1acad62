import numpy as np
import pytest

from queuerl.errors import DimensionMismatch
from queuerl.model import Adam, Mlp

# the four network shapes of a default agent on a 4-edge environment
AGENT_SHAPES = [
    ("sigmoid", [4, 64, 64, 4]),     # actor
    ("identity", [8, 64, 64, 1]),    # critic
    ("identity", [8, 64, 64, 4]),    # next-state predictor
    ("identity", [8, 64, 64, 1]),    # reward predictor
]


def projected_loss(net, x, proj):
    return float((net.forward(x) * proj).sum())


def check_param_gradients(net, rng, coords_per_array=40, h=1e-5, tol=1e-4):
    """Central finite differences against the analytic gradients."""
    x = rng.normal(size=(3, net.in_dim))
    proj = rng.normal(size=(3, net.out_dim))
    net.forward(x)
    net.backward(proj)
    grads = [g.copy() for g in net.gradients()]
    for arr, grad in zip(net.parameters(), grads):
        flat, gflat = arr.ravel(), grad.ravel()
        idx = rng.choice(arr.size, size=min(coords_per_array, arr.size), replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            up = projected_loss(net, x, proj)
            flat[i] = orig - h
            down = projected_loss(net, x, proj)
            flat[i] = orig
            numeric = (up - down) / (2 * h)
            rel = abs(numeric - gflat[i]) / max(1.0, abs(numeric), abs(gflat[i]))
            assert rel < tol, f"param grad off by {rel}"


@pytest.mark.parametrize("activation,sizes", AGENT_SHAPES)
def test_gradients_match_finite_differences(activation, sizes):
    rng = np.random.default_rng(hash((activation, tuple(sizes))) % 2**32)
    for draw in range(10):
        net = Mlp(sizes, activation, rng)
        check_param_gradients(net, rng, coords_per_array=12)


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    net = Mlp([6, 32, 2], "identity", rng)
    x = rng.normal(size=(2, 6))
    proj = rng.normal(size=(2, 2))
    net.forward(x)
    dx = net.backward(proj)
    h = 1e-5
    for r in range(2):
        for c in range(6):
            xp, xm = x.copy(), x.copy()
            xp[r, c] += h
            xm[r, c] -= h
            numeric = (projected_loss(net, xp, proj) - projected_loss(net, xm, proj)) / (2 * h)
            assert abs(numeric - dx[r, c]) / max(1.0, abs(numeric)) < 1e-4


def test_sigmoid_output_stays_in_unit_interval():
    rng = np.random.default_rng(0)
    net = Mlp([3, 16, 2], "sigmoid", rng)
    out = net.forward(rng.normal(scale=100.0, size=(50, 3)))
    assert np.all(out > 0.0) and np.all(out < 1.0)


def test_zero_weights_sigmoid_gives_half():
    net = Mlp([5, 8, 3], "sigmoid", np.random.default_rng(0))
    for w in net.weights:
        w[:] = 0.0
    for b in net.biases:
        b[:] = 0.0
    assert np.all(net.forward(np.array([3.0, -1.0, 0.0, 9.9, 2.0])) == 0.5)


def test_forward_shape_handling():
    net = Mlp([4, 8, 2], "identity", np.random.default_rng(1))
    single = net.forward(np.zeros(4))
    batch = net.forward(np.zeros((5, 4)))
    assert single.shape == (2,)
    assert batch.shape == (5, 2)
    with pytest.raises(DimensionMismatch):
        net.forward(np.zeros(3))


def test_forward_is_pure():
    net = Mlp([4, 8, 2], "sigmoid", np.random.default_rng(2))
    x = np.array([0.3, 0.7, -0.2, 5.0])
    assert np.array_equal(net.forward(x), net.forward(x))


def test_copy_is_independent():
    net = Mlp([3, 4, 1], "identity", np.random.default_rng(3))
    clone = net.copy()
    net.weights[0][0, 0] += 1.0
    assert clone.weights[0][0, 0] != net.weights[0][0, 0]


def test_blend_from_formula():
    rng = np.random.default_rng(4)
    online = Mlp([2, 3, 1], "identity", rng)
    target = Mlp([2, 3, 1], "identity", rng)
    online.weights[0][:] = 2.0
    target.weights[0][:] = 1.0

    snapshot = [w.copy() for w in target.weights]
    target.blend_from(online, 0.0)
    assert all(np.array_equal(a, b) for a, b in zip(target.weights, snapshot))

    target.blend_from(online, 0.5)
    assert np.all(target.weights[0] == 1.5)

    target.blend_from(online, 1.0)
    assert all(np.array_equal(a, b) for a, b in zip(target.weights, online.weights))
    assert all(np.array_equal(a, b) for a, b in zip(target.biases, online.biases))


def test_adam_descends_on_regression():
    rng = np.random.default_rng(5)
    net = Mlp([3, 16, 1], "identity", rng)
    opt = Adam(net, lr=1e-2)
    x = rng.normal(size=(8, 3))
    y = rng.normal(size=(8, 1))
    losses = []
    for _ in range(500):
        err = net.forward(x) - y
        losses.append(float(np.mean(err**2)))
        net.backward((2.0 / err.size) * err)
        opt.step()
    assert losses[-1] < 0.1 * losses[0]
