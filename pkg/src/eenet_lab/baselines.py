"""Comparison agents: LinUCB, KernelUCB, Neural-Epsilon, NeuralUCB, NeuralTS.

The three neural agents share ``ExploitationNet`` with the EE-Net agent, so
they differ only in how they explore around f1. NeuralUCB and NeuralTS use a
diagonal approximation of the gradient outer-product matrix.
"""

import numpy as np

from .bandit_core import Agent, argmax_first
from .eenet_agent import ExploitationNet
from .rng import make_rng


class RidgeState:
    """Shared-parameter ridge regression with a Sherman-Morrison inverse."""

    def __init__(self, dim, lam=1.0):
        if lam <= 0:
            raise ValueError("lambda must be positive")
        self.lam = float(lam)
        self.A = lam * np.eye(dim)
        self.A_inv = np.eye(dim) / lam
        self.b = np.zeros(dim)

    @property
    def theta(self):
        return self.A_inv @ self.b

    def update(self, x, r):
        x = np.asarray(x, dtype=np.float64)
        self.A += np.outer(x, x)
        Ax = self.A_inv @ x
        self.A_inv -= np.outer(Ax, Ax) / (1.0 + x @ Ax)
        self.b += r * x


class LinUCBAgent(Agent):
    def __init__(self, dim, alpha=0.1, lam=1.0):
        super().__init__()
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.alpha = float(alpha)
        self.state = RidgeState(dim, lam)

    def scores(self, X):
        s = self.state
        width = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", X, s.A_inv, X), 0.0))
        return X @ s.theta + self.alpha * width

    def _select(self, round_ctx):
        return argmax_first(self.scores(round_ctx.features))

    def _observe(self, round_ctx, obs):
        self.state.update(round_ctx.features[obs.chosen_index], obs.reward)


def linucb_select(state, round_ctx, alpha):
    agent = LinUCBAgent(round_ctx.dim, alpha, state.lam)
    agent.state = state
    return argmax_first(agent.scores(round_ctx.features))


def linucb_update(state, x, r):
    state.update(x, r)
    return state


def rbf(U, V, gamma):
    U, V = np.atleast_2d(U), np.atleast_2d(V)
    sq = np.sum(U ** 2, 1)[:, None] + np.sum(V ** 2, 1)[None, :] - 2.0 * U @ V.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


class KernelState:
    """RBF kernel ridge state; ``K_inv`` is ``(K + lam I)^-1``, grown by block updates."""

    def __init__(self, dim, lam=1.0, gamma=1.0, nu=0.1, cap=1000):
        if lam <= 0:
            raise ValueError("lambda must be positive")
        self.lam, self.gamma, self.nu, self.cap = float(lam), float(gamma), float(nu), int(cap)
        self.X = np.empty((0, dim))
        self.r = np.empty(0)
        self.K_inv = np.empty((0, 0))

    def __len__(self):
        return len(self.r)

    def posterior(self, Q):
        """Mean and variance at query rows ``Q``."""
        Q = np.atleast_2d(Q)
        prior = np.ones(len(Q))  # k(x, x) = 1 for the RBF kernel
        if len(self) == 0:
            return np.zeros(len(Q)), prior
        kq = rbf(Q, self.X, self.gamma)
        mean = kq @ (self.K_inv @ self.r)
        var = prior - np.einsum("ij,jk,ik->i", kq, self.K_inv, kq)
        return mean, np.maximum(var, 0.0)

    def update(self, x, r):
        if len(self) >= self.cap:
            return False
        x = np.asarray(x, dtype=np.float64)
        k = rbf(x, self.X, self.gamma)[0] if len(self) else np.empty(0)
        c = 1.0 + self.lam
        Kk = self.K_inv @ k
        s = c - k @ Kk
        n = len(self)
        new = np.empty((n + 1, n + 1))
        new[:n, :n] = self.K_inv + np.outer(Kk, Kk) / s
        new[:n, n] = new[n, :n] = -Kk / s
        new[n, n] = 1.0 / s
        self.K_inv = new
        self.X = np.vstack([self.X, x])
        self.r = np.append(self.r, r)
        return True


class KernelUCBAgent(Agent):
    def __init__(self, dim, lam=1.0, nu=0.1, gamma=1.0, cap=1000):
        super().__init__()
        self.state = KernelState(dim, lam, gamma, nu, cap)

    def scores(self, X):
        mean, var = self.state.posterior(X)
        return mean + self.state.nu * np.sqrt(var)

    def _select(self, round_ctx):
        return argmax_first(self.scores(round_ctx.features))

    def _observe(self, round_ctx, obs):
        self.state.update(round_ctx.features[obs.chosen_index], obs.reward)


def kernelucb_select(state, round_ctx):
    mean, var = state.posterior(round_ctx.features)
    return argmax_first(mean + state.nu * np.sqrt(var))


def kernelucb_update(state, x, r):
    state.update(x, r)
    return state


class DiagSketch:
    """Diagonal surrogate for ``lam I + sum g g^T / m``."""

    def __init__(self, n_params, lam=0.1, m=100):
        if lam <= 0:
            raise ValueError("lambda must be positive")
        self.lam, self.m = float(lam), int(m)
        self.diag = np.full(n_params, self.lam)

    def variance(self, G):
        """``sum_j g_j^2 / (m * diag_j)`` for each row of ``G``."""
        return (np.atleast_2d(G) ** 2) @ (1.0 / (self.m * self.diag))

    def update(self, g):
        self.diag += np.asarray(g) ** 2 / self.m


def neuralucb_update(sketch, g):
    sketch.update(g)
    return sketch


class _NeuralAgent(Agent):
    """Common f1 handling: buffer on observe, refit on the training cadence."""

    def __init__(self, dim, hidden=(100,), lr=0.001, iters=100, seed=0,
                 train_every=1, warm_start=False, batch_size=None, f1_init=None):
        super().__init__()
        if train_every < 1:
            raise ValueError("train_every must be >= 1")
        self.f1 = ExploitationNet(dim, hidden, lr, iters, seed, warm_start, batch_size, f1_init)
        self.train_every = int(train_every)
        self.rng = make_rng(seed, "agent.explore")

    def _observe(self, round_ctx, obs):
        self.f1.add(round_ctx.features[obs.chosen_index], obs.reward)

    def _train(self, t):
        if t % self.train_every:
            return None
        theta, loss = self.f1.fit()
        self.f1.net.set_params(theta)
        return loss


class NeuralEpsilonAgent(_NeuralAgent):
    """argmax f1 with probability 1 - eps, otherwise a uniform arm."""

    def __init__(self, dim, epsilon=0.1, **kw):
        super().__init__(dim, **kw)
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        self.epsilon = float(epsilon)

    def _select(self, round_ctx):
        return neural_eps_select(self.f1.net, round_ctx, self.epsilon, self.rng)


def neural_eps_select(f1, round_ctx, epsilon, rng):
    u = rng.random()
    if u >= epsilon:
        return argmax_first(f1.scores(round_ctx.features))
    return int(rng.integers(round_ctx.n_arms))


class _SketchAgent(_NeuralAgent):
    def __init__(self, dim, nu=0.1, lam=0.1, **kw):
        super().__init__(dim, **kw)
        if nu < 0:
            raise ValueError("nu must be >= 0")
        self.nu = float(nu)
        self.sketch = DiagSketch(self.f1.net.n_params, lam, self.f1.hidden_width)
        self._grads = None

    def _observe(self, round_ctx, obs):
        super()._observe(round_ctx, obs)
        self.sketch.update(self._grads[obs.chosen_index])
        self._grads = None


class NeuralUCBAgent(_SketchAgent):
    """argmax ``f1 + nu * sqrt(g^T diag^-1 g / m)``."""

    def ucb(self, G):
        return self.nu * np.sqrt(self.sketch.variance(G))

    def _select(self, round_ctx):
        X = round_ctx.features
        self._grads = self.f1.net.per_sample_grads(X)
        return argmax_first(self.f1.net.scores(X) + self.ucb(self._grads))


def neuralucb_select(f1, sketch, round_ctx, nu):
    G = f1.per_sample_grads(round_ctx.features)
    return argmax_first(f1.scores(round_ctx.features) + nu * np.sqrt(sketch.variance(G)))


class NeuralTSAgent(_SketchAgent):
    """argmax of ``r_i ~ N(f1(x_i), nu^2 sigma_i^2)`` with the diagonal sigma."""

    def _select(self, round_ctx):
        X = round_ctx.features
        self._grads = self.f1.net.per_sample_grads(X)
        return neuralts_select(self.f1.net, self.sketch, round_ctx, self.nu, self.rng, self._grads)


def neuralts_select(f1, sketch, round_ctx, nu, rng, grads=None):
    X = round_ctx.features
    G = f1.per_sample_grads(X) if grads is None else grads
    mean = f1.scores(X)
    sd = nu * np.sqrt(sketch.variance(G))
    return argmax_first(mean + sd * rng.standard_normal(len(mean)))
