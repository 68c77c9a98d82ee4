import numpy as np
import pytest

from eenet_lab.nn_core import MlpNetwork


def fd_forward(widths, theta, x, head="linear"):
    """Plain re-implementation of the network, used only as an oracle."""
    offsets = np.cumsum([0] + [widths[l + 1] * widths[l] for l in range(len(widths) - 1)])
    a = np.asarray(x, dtype=np.float64)
    L = len(widths) - 1
    for l in range(L):
        W = theta[offsets[l]:offsets[l + 1]].reshape(widths[l + 1], widths[l])
        a = W @ a
        if l < L - 1:
            a = np.where(a > 0, a, 0.0)
    return float(a[0])


def fd_gradient(net, x, h=1e-5):
    theta = net.params.copy()
    g = np.empty_like(theta)
    for j in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[j] += h
        down[j] -= h
        g[j] = (fd_forward(net.widths, up, x) - fd_forward(net.widths, down, x)) / (2 * h)
    return g


def fd_matches(analytic, numeric, rel=1e-4, abs_tol=1e-8):
    err = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return bool(np.all((err <= rel * scale) | (err <= abs_tol)))


def make_fixture_f1(seed=2024):
    """Frozen regression fixture: 100 unit-norm inputs in R^5, smooth target."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(100, 5))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    w = np.array([0.9, -0.4, 0.3, 0.2, -0.1])
    y = 0.5 + 0.3 * np.sin(2.0 * X @ w)
    return X, y


@pytest.fixture
def fixture_f1():
    return make_fixture_f1()


def unit_rows(rng, n, d):
    X = rng.normal(size=(n, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def hand_net(widths, mats, head="linear"):
    net = MlpNetwork(widths, head)
    net.set_params(np.concatenate([np.asarray(m, dtype=float).ravel() for m in mats]))
    return net
