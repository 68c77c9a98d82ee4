"""Bias-free fully-connected ReLU networks with a flat parameter vector.

The network computes ``W_L relu(W_{L-1} ... relu(W_1 x))`` with an optional
sigmoid on top. All weights live in one contiguous float64 vector ``theta``;
layer ``l`` occupies a row-major block of shape ``(widths[l+1], widths[l])``,
blocks ordered from the input layer to the output layer. Gradients returned
by this module use the same order.

ReLU's derivative at exactly 0 is taken to be 0.
"""

import struct

import numpy as np

HEADS = ("linear", "sigmoid")
CE_CLIP = 1e-12


class MlpNetwork:
    """Scalar-output MLP whose weights are views into ``self.params``."""

    def __init__(self, widths, output_head="linear", params=None):
        widths = tuple(int(w) for w in widths)
        if len(widths) < 2:
            raise ValueError(f"need at least 2 widths (input, output), got {widths}")
        if any(w < 1 for w in widths):
            raise ValueError(f"every width must be >= 1, got {widths}")
        if widths[-1] != 1:
            raise ValueError(f"final width must be 1, got {widths[-1]}")
        if output_head not in HEADS:
            raise ValueError(f"output_head must be one of {HEADS}")
        self.widths = widths
        self.output_head = output_head
        self.shapes = [(widths[l + 1], widths[l]) for l in range(len(widths) - 1)]
        sizes = [r * c for r, c in self.shapes]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.n_params = int(self.offsets[-1])
        if params is None:
            self.params = np.zeros(self.n_params)
        else:
            self.set_params(params)

    @property
    def depth(self):
        return len(self.shapes)

    @property
    def input_dim(self):
        return self.widths[0]

    @property
    def weights(self):
        """Per-layer weight matrices (views, writes go through to ``params``)."""
        return [
            self.params[self.offsets[l]:self.offsets[l + 1]].reshape(shape)
            for l, shape in enumerate(self.shapes)
        ]

    def set_params(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        self.params = theta.copy()

    def copy(self):
        return MlpNetwork(self.widths, self.output_head, self.params)

    def _check_inputs(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(
                f"input dimension mismatch: network expects {self.input_dim}, got {X.shape[-1]}"
            )
        return X, single

    def _forward_cache(self, X):
        # acts[l] is the input to layer l; pre[l] its pre-activation
        acts, pre = [X], []
        a = X
        for l, W in enumerate(self.weights):
            z = a @ W.T
            pre.append(z)
            if l < self.depth - 1:
                a = np.maximum(z, 0.0)
                acts.append(a)
        return acts, pre

    def scores(self, X):
        """Pre-head outputs for a batch ``X`` of shape (n, d)."""
        X, _ = self._check_inputs(X)
        _, pre = self._forward_cache(X)
        return pre[-1][:, 0]

    def predict(self, X):
        """Outputs (after the head) for a batch ``X`` of shape (n, d)."""
        s = self.scores(X)
        return _sigmoid(s) if self.output_head == "sigmoid" else s

    def backward(self, X, upstream, cache=None):
        """Flat gradient of ``sum_i upstream[i] * score(X[i])``."""
        weights = self.weights
        acts, pre = cache if cache is not None else self._forward_cache(X)
        grad = np.empty(self.n_params)
        delta = np.asarray(upstream, dtype=np.float64)[:, None]
        for l in range(self.depth - 1, -1, -1):
            gW = delta.T @ acts[l]
            grad[self.offsets[l]:self.offsets[l + 1]] = gW.ravel()
            if l > 0:
                delta = delta @ weights[l]
                delta *= pre[l - 1] > 0.0
        return grad

    def per_sample_grads(self, X):
        """Gradients of each pre-head score, shape (n, n_params)."""
        X, _ = self._check_inputs(X)
        weights = self.weights
        acts, pre = self._forward_cache(X)
        n = X.shape[0]
        out = np.empty((n, self.n_params))
        delta = np.ones((n, 1))
        for l in range(self.depth - 1, -1, -1):
            block = delta[:, :, None] * acts[l][:, None, :]
            out[:, self.offsets[l]:self.offsets[l + 1]] = block.reshape(n, -1)
            if l > 0:
                delta = (delta @ weights[l]) * (pre[l - 1] > 0.0)
        return out


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def init_network(widths, output_head="linear", rng=None):
    """Draw a network: hidden layers ~ N(0, 2/m_l), last layer ~ N(0, 1/m_{L-1}).

    ``m_l`` is the output width of hidden layer ``l``; for the last layer the
    variance uses its input width.
    """
    net = MlpNetwork(widths, output_head)
    if rng is None:
        raise ValueError("init_network needs an explicit rng")
    for l, (rows, cols) in enumerate(net.shapes):
        if l < net.depth - 1:
            sd = np.sqrt(2.0 / rows)
        else:
            sd = np.sqrt(1.0 / cols)
        net.params[net.offsets[l]:net.offsets[l + 1]] = rng.normal(0.0, sd, size=rows * cols)
    return net


def forward(net, x):
    """Scalar output of ``net`` at a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward expects a single feature vector")
    return float(net.predict(x[None, :])[0])


def grad_params(net, x):
    """Flat gradient of the pre-head score at a single input."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("grad_params expects a single feature vector")
    X, _ = net._check_inputs(x)
    return net.backward(X, np.ones(1))


def _prepare(net, inputs, targets):
    X, _ = net._check_inputs(inputs)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if X.shape[0] == 0:
        raise ValueError("training data is empty")
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
    return X, y


def _batches(n, batch_size, rng):
    if batch_size is None or batch_size >= n:
        return None
    if rng is None:
        raise ValueError("mini-batch training needs an rng")
    return rng.choice(n, size=batch_size, replace=False)


def squared_loss(net, inputs, targets):
    X, y = _prepare(net, inputs, targets)
    r = net.scores(X) - y if net.output_head == "linear" else net.predict(X) - y
    return 0.5 * float(r @ r)


def train_squared(net, inputs, targets, lr, iters, batch_size=None, rng=None):
    """Gradient descent on ``0.5 * sum_i (f(x_i) - y_i)^2``; mutates ``net``.

    Runs exactly ``iters`` full-batch steps (or mini-batch steps whose summed
    gradient is rescaled by ``n / batch_size`` when ``batch_size`` is given)
    and returns the full-data loss after the last step.
    """
    X, y = _prepare(net, inputs, targets)
    if lr <= 0:
        raise ValueError("lr must be positive")
    if iters < 0:
        raise ValueError("iters must be >= 0")
    if net.output_head != "linear":
        raise ValueError("train_squared expects a linear output head")
    n = X.shape[0]
    for _ in range(int(iters)):
        idx = _batches(n, batch_size, rng)
        Xb, yb = (X, y) if idx is None else (X[idx], y[idx])
        cache = net._forward_cache(Xb)
        resid = cache[1][-1][:, 0] - yb
        g = net.backward(Xb, resid, cache)
        if idx is not None:
            g *= n / len(idx)
        net.params -= lr * g
    r = net.scores(X) - y
    return 0.5 * float(r @ r)


def cross_entropy_loss(net, inputs, labels):
    X, p = _prepare(net, inputs, labels)
    f = np.clip(net.predict(X), CE_CLIP, 1.0 - CE_CLIP)
    return float(-np.mean(p * np.log(f) + (1.0 - p) * np.log(1.0 - f)))


def train_cross_entropy(net, inputs, labels, lr, iters, batch_size=None, rng=None):
    """Gradient descent on mean binary cross-entropy; mutates ``net``.

    Outputs are clamped to ``[1e-12, 1 - 1e-12]`` inside the logs. The step uses
    the logit-space gradient ``(sigmoid(z) - p) / n``, which is exact wherever
    the clamp is inactive.
    """
    if net.output_head != "sigmoid":
        raise ValueError("cross-entropy training needs a sigmoid output head")
    X, p = _prepare(net, inputs, labels)
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("probability labels must lie in [0, 1]")
    if lr <= 0:
        raise ValueError("lr must be positive")
    if iters < 0:
        raise ValueError("iters must be >= 0")
    n = X.shape[0]
    for _ in range(int(iters)):
        idx = _batches(n, batch_size, rng)
        Xb, pb = (X, p) if idx is None else (X[idx], p[idx])
        cache = net._forward_cache(Xb)
        f = _sigmoid(cache[1][-1][:, 0])
        g = net.backward(Xb, (f - pb) / len(pb), cache)
        net.params -= lr * g
    return cross_entropy_loss(net, X, p)


def params_to_bytes(theta):
    """Length-prefixed little-endian float64 array."""
    theta = np.ascontiguousarray(theta, dtype="<f8").ravel()
    return struct.pack("<Q", theta.size) + theta.tobytes()


def params_from_bytes(buf, offset=0):
    """Inverse of ``params_to_bytes``; returns ``(array, next_offset)``."""
    (count,) = struct.unpack_from("<Q", buf, offset)
    offset += 8
    end = offset + 8 * count
    if end > len(buf):
        raise ValueError("truncated parameter array")
    arr = np.frombuffer(buf[offset:end], dtype="<f8").astype(np.float64)
    return arr, end
