"""The exploitation / exploration / decision-maker agent.

Per round the agent scores every arm with

* f1, a reward regressor on arm features,
* f2, a regressor of the potential gain ``r - f1(x)`` whose input is the
  normalised gradient of f1 at the arm (``phi``),
* f3, a decision maker combining the two scores: a fixed linear blend, a
  small sigmoid network trained to predict the probability that the arm is
  optimal, or a hybrid that is linear up to ``switch_round`` and neural after.

Training samples for f2 and f3 are frozen when collected: the gradient
feature, the f1 score used in the label and the (f1, f2) pair fed to f3 all
come from the parameters that were active when the arm was played.

By default each ``train`` call restarts every network from its initial
parameters and runs a fixed number of full-batch gradient steps on the whole
buffer.
"""

from dataclasses import asdict, dataclass
import json
import struct
import warnings

import numpy as np

from .bandit_core import Agent, argmax_first
from .nn_core import (
    init_network,
    params_from_bytes,
    params_to_bytes,
    train_cross_entropy,
    train_squared,
)
from .rng import make_rng

F3_MODES = ("linear", "neural", "hybrid")
LABEL_MODES = ("signed", "absolute", "relu")
P_MODES = ("binary", "continuous_direct", "continuous_threshold")
PHI_MODES = ("normalize_concat", "normalize_project")
DRAW_MODES = ("latest", "uniform_historical")

SNAPSHOT_MAGIC = b"EENT"
SNAPSHOT_VERSION = 1


# -- gradient features ------------------------------------------------------

class GaussianProjection:
    """Fixed k x dim matrix with N(0, 1/k) entries, drawn from ``seed``."""

    def __init__(self, k, dim, seed):
        if k < 1:
            raise ValueError("projection dimension must be >= 1")
        self.k, self.dim, self.seed = int(k), int(dim), int(seed)
        rng = make_rng(seed, "phi.projection", dim, k)
        self.matrix = rng.normal(0.0, 1.0 / np.sqrt(k), size=(k, dim))

    def __call__(self, v):
        return v @ self.matrix.T


def phi_batch(G, X, mode="normalize_concat", projection=None):
    """Row-wise ``phi`` for gradients ``G`` (n, p) at arms ``X`` (n, d).

    Returns ``(features, degenerate)`` where ``degenerate[i]`` flags a zero
    gradient. normalize_concat gives ``(g / (sqrt2 |g|), x / sqrt2)``;
    a zero gradient gives ``(0, x / sqrt2)``. normalize_project gives the
    projected unit gradient rescaled to unit norm (zero for a zero gradient).
    """
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    norms = np.linalg.norm(G, axis=1)
    degenerate = norms == 0.0
    safe = np.where(degenerate, 1.0, norms)[:, None]
    unit = np.where(degenerate[:, None], 0.0, G / safe)
    if mode == "normalize_concat":
        root2 = np.sqrt(2.0)
        return np.hstack([unit / root2, X / root2]), degenerate
    if mode == "normalize_project":
        if projection is None:
            raise ValueError("normalize_project needs a projection")
        P = projection(unit)
        pn = np.linalg.norm(P, axis=1)
        degenerate = degenerate | (pn == 0.0)
        P = np.where(degenerate[:, None], 0.0, P / np.where(pn == 0.0, 1.0, pn)[:, None])
        return P, degenerate
    raise ValueError(f"unknown phi mode {mode!r}; expected one of {PHI_MODES}")


def phi(grad, x, mode="normalize_concat", projection=None):
    """``phi`` for a single gradient; returns ``(vector, degenerate)``."""
    out, deg = phi_batch(np.asarray(grad)[None, :], np.asarray(x)[None, :], mode, projection)
    return out[0], bool(deg[0])


# -- labels -------------------------------------------------------------------

def exploration_label(r, f1_score, mode="signed"):
    """Potential gain ``r - f1``, or its absolute value / positive part."""
    gain = r - f1_score
    if mode == "signed":
        return gain
    if mode == "absolute":
        return abs(gain)
    if mode == "relu":
        return max(0.0, gain)
    raise ValueError(f"unknown label mode {mode!r}; expected one of {LABEL_MODES}")


def decision_label(r, mode="continuous_direct", a=0.0, b=1.0, threshold=0.5):
    """Probability label for f3 from a reward on ``[a, b]``.

    binary: 1 if ``r == b`` else 0. continuous_direct: ``(r - a) / (b - a)``.
    continuous_threshold: 1 if ``r > threshold`` else 0.
    """
    if not a < b:
        raise ValueError("need a < b")
    if r < a or r > b:
        warnings.warn(f"reward {r!r} outside [{a}, {b}]; clipped", stacklevel=2)
        r = min(max(r, a), b)
    if mode == "binary":
        return 1.0 if r == b else 0.0
    if mode == "continuous_direct":
        return (r - a) / (b - a)
    if mode == "continuous_threshold":
        return 1.0 if r > threshold else 0.0
    raise ValueError(f"unknown p mode {mode!r}; expected one of {P_MODES}")


# -- configuration ------------------------------------------------------------

@dataclass
class EeNetConfig:
    """Hyperparameters. Hidden widths exclude the input and output layers."""

    f1_hidden: tuple = (100,)
    f2_hidden: tuple = (100,)
    f3_hidden: tuple = (20,)
    lr1: float = 0.001
    lr2: float = 0.001
    lr3: float = 0.01
    K1: int = 100
    K2: int = 100
    K3: int = 100
    f3_mode: str = "hybrid"
    f3_bias: bool = True
    w1: float = 1.0
    w2: float = 1.0
    switch_round: int = 500
    label_mode: str = "signed"
    p_mode: str = "continuous_direct"
    p_a: float = 0.0
    p_b: float = 1.0
    p_threshold: float = 0.5
    phi_mode: str = "normalize_project"
    phi_k: int = 10
    projection_seed: int = 0
    parameter_draw: str = "latest"
    history_cap: int = 64
    augmentation_cr: float = None
    train_every: int = 1
    warm_start: bool = False
    batch_size: int = None

    def __post_init__(self):
        for name in ("f1_hidden", "f2_hidden", "f3_hidden"):
            setattr(self, name, tuple(int(w) for w in getattr(self, name)))
        checks = [
            (self.f3_mode in F3_MODES, f"f3_mode must be one of {F3_MODES}"),
            (self.label_mode in LABEL_MODES, f"label_mode must be one of {LABEL_MODES}"),
            (self.p_mode in P_MODES, f"p_mode must be one of {P_MODES}"),
            (self.phi_mode in PHI_MODES, f"phi_mode must be one of {PHI_MODES}"),
            (self.parameter_draw in DRAW_MODES, f"parameter_draw must be one of {DRAW_MODES}"),
            (np.isfinite(self.w1) and np.isfinite(self.w2), "w1 and w2 must be finite"),
            (self.switch_round >= 1, "switch_round must be >= 1"),
            (self.p_a < self.p_b, "need p_a < p_b"),
            (self.history_cap >= 1, "history_cap must be >= 1"),
            (self.train_every >= 1, "train_every must be >= 1"),
            (min(self.K1, self.K2, self.K3) >= 0, "iteration counts must be >= 0"),
            (min(self.lr1, self.lr2, self.lr3) > 0, "learning rates must be positive"),
        ]
        if self.p_mode == "continuous_threshold":
            checks.append((self.p_a < self.p_threshold < self.p_b, "need p_a < p_threshold < p_b"))
        if self.augmentation_cr is not None:
            checks.append((0.0 < self.augmentation_cr < 1.0, "augmentation_cr must lie in (0, 1)"))
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)

    def f3_is_neural(self, t):
        return self.f3_mode == "neural" or (self.f3_mode == "hybrid" and t > self.switch_round)

    def to_dict(self):
        d = asdict(self)
        for name in ("f1_hidden", "f2_hidden", "f3_hidden"):
            d[name] = list(d[name])
        return d


# -- storage ------------------------------------------------------------------

class SampleBuffer:
    """Append-only 2-D float buffer; rows handed out are read-only views."""

    def __init__(self, width):
        self.width = int(width)
        self._data = np.empty((64, self.width))
        self._n = 0

    def __len__(self):
        return self._n

    def append(self, row):
        self.extend(np.asarray(row, dtype=np.float64)[None, :])

    def extend(self, rows):
        rows = np.asarray(rows, dtype=np.float64).reshape(-1, self.width)
        need = self._n + rows.shape[0]
        if need > self._data.shape[0]:
            cap = max(need, 2 * self._data.shape[0])
            grown = np.empty((cap, self.width))
            grown[:self._n] = self._data[:self._n]
            self._data = grown
        self._data[self._n:need] = rows
        self._n = need

    @property
    def data(self):
        view = self._data[:self._n]
        view.flags.writeable = False
        return view


@dataclass(frozen=True)
class ExplorationSample:
    phi_input: np.ndarray
    label: float
    degenerate: bool = False


@dataclass(frozen=True)
class DecisionSample:
    f1_score: float
    f2_score: float
    p: float


class ParameterHistory:
    """Checkpoints with reservoir retention once ``cap`` is reached.

    (theta1, theta2) pairs and theta3 are kept in separate reservoirs so the
    two can be drawn independently.
    """

    def __init__(self, cap, rng):
        self.cap = int(cap)
        self.rng = rng
        self.pairs, self.pair_rounds, self._pairs_seen = [], [], 0
        self.f3, self.f3_rounds, self._f3_seen = [], [], 0
        self.last_draw = None

    def _offer(self, store, rounds, seen, item, t):
        if len(store) < self.cap:
            store.append(item)
            rounds.append(t)
        else:
            j = int(self.rng.integers(seen + 1))
            if j < self.cap:
                store[j] = item
                rounds[j] = t
        return seen + 1

    def add(self, t, theta1, theta2, theta3):
        self._pairs_seen = self._offer(
            self.pairs, self.pair_rounds, self._pairs_seen, (theta1.copy(), theta2.copy()), t
        )
        self._f3_seen = self._offer(self.f3, self.f3_rounds, self._f3_seen, theta3.copy(), t)

    def __len__(self):
        return len(self.pairs)

    def draw(self):
        i = int(self.rng.integers(len(self.pairs)))
        j = int(self.rng.integers(len(self.f3)))
        self.last_draw = (i, j)
        return self.pairs[i], self.f3[j]


@dataclass
class TrainingReport:
    t: int
    loss1: float = None
    loss2: float = None
    loss3: float = None
    skipped: bool = False


class ExploitationNet:
    """f1 plus its (x, r) buffer and the per-round refit.

    Shared by the neural baselines so every neural agent trains the same f1
    the same way.
    """

    def __init__(self, dim, hidden=(100,), lr=0.001, iters=100, seed=0,
                 warm_start=False, batch_size=None, init=None):
        if init is not None:
            self.net = init.copy()
            if self.net.input_dim != dim:
                raise ValueError("initial f1 has the wrong input dimension")
        else:
            self.net = init_network((dim, *hidden, 1), "linear", make_rng(seed, "f1.init"))
        self.theta0 = self.net.params.copy()
        self.lr, self.iters = lr, int(iters)
        self.warm_start = warm_start
        self.batch_size = batch_size
        self.batch_rng = make_rng(seed, "f1.batches")
        self.X = SampleBuffer(dim)
        self.r = []

    @property
    def hidden_width(self):
        return self.net.widths[1]

    def add(self, x, r):
        self.X.append(x)
        self.r.append(float(r))

    def fit(self):
        """Refit on the full buffer; returns ``(fitted_params, final_loss)``."""
        if not self.r:
            raise ValueError("f1 buffer is empty")
        work = self.net.copy()
        if not self.warm_start:
            work.set_params(self.theta0)
        loss = train_squared(work, self.X.data, np.asarray(self.r), self.lr, self.iters,
                             self.batch_size, self.batch_rng)
        return work.params, loss


# -- the agent ----------------------------------------------------------------

class EeNetAgent(Agent):
    """Three-network agent. ``dim`` is the arm feature dimension."""

    def __init__(self, config=None, dim=10, seed=0, f1_init=None):
        super().__init__()
        self.config = cfg = config if config is not None else EeNetConfig()
        self.dim, self.seed = int(dim), int(seed)
        self.f1 = ExploitationNet(dim, cfg.f1_hidden, cfg.lr1, cfg.K1, seed,
                                  cfg.warm_start, cfg.batch_size, f1_init)
        p1 = self.f1.net.n_params
        if cfg.phi_mode == "normalize_concat":
            self.projection = None
            phi_dim = p1 + dim
        else:
            self.projection = GaussianProjection(cfg.phi_k, p1, cfg.projection_seed)
            phi_dim = cfg.phi_k
        self.phi_dim = phi_dim
        self.f2 = init_network((phi_dim, *cfg.f2_hidden, 1), "linear", make_rng(seed, "f2.init"))
        f3_in = 3 if cfg.f3_bias else 2
        self.f3 = init_network((f3_in, *cfg.f3_hidden, 1), "sigmoid", make_rng(seed, "f3.init"))
        self.theta2_0 = self.f2.params.copy()
        self.theta3_0 = self.f3.params.copy()
        self.f2_inputs = SampleBuffer(phi_dim)
        self.f2_labels = []
        self.f2_degenerate = []
        self.f3_inputs = SampleBuffer(2)
        self.f3_labels = []
        self.batch_rng = make_rng(seed, "f23.batches")
        self.history = ParameterHistory(cfg.history_cap, make_rng(seed, "history"))
        self.history.add(0, self.f1.theta0, self.theta2_0, self.theta3_0)
        self.f3_trained = False
        self._cache = None

    # scoring

    def arm_features(self, X):
        """f1 scores, phi inputs and degenerate flags for arms ``X``."""
        f1 = self.f1.net.scores(X)
        G = self.f1.net.per_sample_grads(X)
        feats, deg = phi_batch(G, X, self.config.phi_mode, self.projection)
        return f1, feats, deg

    def f3_input(self, pairs):
        """(f1, f2) rows, plus a constant 1 column when ``f3_bias`` is set."""
        pairs = np.atleast_2d(pairs)
        if self.config.f3_bias:
            return np.column_stack([pairs, np.ones(len(pairs))])
        return pairs

    def combine(self, f1, f2, t):
        cfg = self.config
        if cfg.f3_is_neural(t):
            return self.f3.predict(self.f3_input(np.column_stack([f1, f2])))
        if cfg.f3_mode == "hybrid":
            return f1 + f2
        return cfg.w1 * f1 + cfg.w2 * f2

    def score_arms(self, X, t):
        """Arrays ``(f1, f2, f3)`` of per-arm scores in round ``t``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        f1, feats, _ = self.arm_features(X)
        f2 = self.f2.scores(feats)
        return f1, f2, self.combine(f1, f2, t)

    def score_arm(self, x, t):
        f1, f2, f3 = self.score_arms(np.asarray(x)[None, :], t)
        return float(f1[0]), float(f2[0]), float(f3[0])

    def _select(self, round_ctx):
        X = round_ctx.features
        f1, feats, deg = self.arm_features(X)
        f2 = self.f2.scores(feats)
        f3 = self.combine(f1, f2, round_ctx.t)
        self._cache = (X, f1, f2, feats, deg)
        return argmax_first(f3)

    # observing

    def _observe(self, round_ctx, obs):
        cfg = self.config
        X, f1, f2, feats, deg = self._cache
        i, r = obs.chosen_index, obs.reward
        self.f1.add(X[i], r)
        self.f2_inputs.append(feats[i])
        self.f2_labels.append(float(exploration_label(r, f1[i], cfg.label_mode)))
        self.f2_degenerate.append(bool(deg[i]))
        self.f3_inputs.append([f1[i], f2[i]])
        self.f3_labels.append(decision_label(r, cfg.p_mode, cfg.p_a, cfg.p_b, cfg.p_threshold))
        if cfg.augmentation_cr is not None and cfg.p_mode == "binary" and r == cfg.p_a:
            others = [j for j in range(len(X)) if j != i]
            self.f2_inputs.extend(feats[others])
            self.f2_labels.extend([float(cfg.augmentation_cr)] * len(others))
            self.f2_degenerate.extend(bool(deg[j]) for j in others)
        self._cache = None

    @property
    def exploration_samples(self):
        data = self.f2_inputs.data
        return [ExplorationSample(data[k], self.f2_labels[k], self.f2_degenerate[k])
                for k in range(len(self.f2_labels))]

    @property
    def decision_samples(self):
        data = self.f3_inputs.data
        return [DecisionSample(float(data[k, 0]), float(data[k, 1]), self.f3_labels[k])
                for k in range(len(self.f3_labels))]

    # training

    def _due(self, t):
        cfg = self.config
        if t % cfg.train_every == 0:
            return True
        # the neural decision maker must be fitted before its first use
        return cfg.f3_mode == "hybrid" and t >= cfg.switch_round and not self.f3_trained

    def _fit_f2(self):
        cfg = self.config
        work = self.f2.copy()
        if not cfg.warm_start:
            work.set_params(self.theta2_0)
        loss = train_squared(work, self.f2_inputs.data, np.asarray(self.f2_labels),
                             cfg.lr2, cfg.K2, cfg.batch_size, self.batch_rng)
        return work.params, loss

    def _fit_f3(self):
        cfg = self.config
        work = self.f3.copy()
        if not cfg.warm_start:
            work.set_params(self.theta3_0)
        loss = train_cross_entropy(work, self.f3_input(self.f3_inputs.data), np.asarray(self.f3_labels),
                                   cfg.lr3, cfg.K3, cfg.batch_size, self.batch_rng)
        return work.params, loss

    def _train(self, t):
        if not self._due(t):
            return TrainingReport(t, skipped=True)
        cfg = self.config
        theta1, loss1 = self.f1.fit()
        theta2, loss2 = self._fit_f2()
        theta3, loss3 = self.f3.params.copy(), None
        if cfg.f3_mode == "neural" or (cfg.f3_mode == "hybrid" and t >= cfg.switch_round):
            theta3, loss3 = self._fit_f3()
            self.f3_trained = True
        self.history.add(t, theta1, theta2, theta3)
        if cfg.parameter_draw == "latest":
            active = (theta1, theta2), theta3
        else:
            active = self.history.draw()
        (a1, a2), a3 = active
        self.f1.net.set_params(a1)
        self.f2.set_params(a2)
        self.f3.set_params(a3)
        return TrainingReport(t, loss1, loss2, loss3)

    # checkpoint / resume

    def snapshot(self):
        """Versioned binary blob holding parameters, buffers and history."""
        cfg = self.config
        header = {
            "version": SNAPSHOT_VERSION,
            "config": cfg.to_dict(),
            "dim": self.dim,
            "seed": self.seed,
            "widths": [list(self.f1.net.widths), list(self.f2.widths), list(self.f3.widths)],
            "f3_trained": self.f3_trained,
            "f2_degenerate": self.f2_degenerate,
            "history_rounds": [self.history.pair_rounds, self.history.f3_rounds],
            "history_seen": [self.history._pairs_seen, self.history._f3_seen],
            "rng": {
                "history": self.history.rng.bit_generator.state,
                "f1_batches": self.f1.batch_rng.bit_generator.state,
                "f23_batches": self.batch_rng.bit_generator.state,
            },
        }
        hb = json.dumps(header, sort_keys=True).encode("utf-8")
        parts = [SNAPSHOT_MAGIC, struct.pack("<II", SNAPSHOT_VERSION, len(hb)), hb]
        arrays = [
            self.f1.net.params, self.f2.params, self.f3.params,
            self.f1.theta0, self.theta2_0, self.theta3_0,
            self.f1.X.data.ravel(), np.asarray(self.f1.r),
            self.f2_inputs.data.ravel(), np.asarray(self.f2_labels),
            self.f3_inputs.data.ravel(), np.asarray(self.f3_labels),
        ]
        for th1, th2 in self.history.pairs:
            arrays += [th1, th2]
        arrays += list(self.history.f3)
        parts += [params_to_bytes(a) for a in arrays]
        return b"".join(parts)

    @classmethod
    def restore(cls, blob):
        if blob[:4] != SNAPSHOT_MAGIC:
            raise ValueError("not an agent snapshot")
        version, hlen = struct.unpack_from("<II", blob, 4)
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        header = json.loads(blob[12:12 + hlen].decode("utf-8"))
        offset = 12 + hlen
        cfg = EeNetConfig(**header["config"])
        agent = cls(cfg, header["dim"], header["seed"])

        def take():
            nonlocal offset
            arr, offset = params_from_bytes(blob, offset)
            return arr

        agent.f1.net.set_params(take())
        agent.f2.set_params(take())
        agent.f3.set_params(take())
        agent.f1.theta0 = take()
        agent.theta2_0 = take()
        agent.theta3_0 = take()
        agent.f1.X.extend(take())
        agent.f1.r = take().tolist()
        agent.f2_inputs.extend(take())
        agent.f2_labels = take().tolist()
        agent.f3_inputs.extend(take())
        agent.f3_labels = take().tolist()
        agent.f2_degenerate = list(header["f2_degenerate"])
        agent.f3_trained = header["f3_trained"]
        hist = agent.history
        pair_rounds, f3_rounds = header["history_rounds"]
        hist.pairs = [(take(), take()) for _ in pair_rounds]
        hist.f3 = [take() for _ in f3_rounds]
        hist.pair_rounds, hist.f3_rounds = list(pair_rounds), list(f3_rounds)
        hist._pairs_seen, hist._f3_seen = header["history_seen"]
        hist.rng.bit_generator.state = header["rng"]["history"]
        agent.f1.batch_rng.bit_generator.state = header["rng"]["f1_batches"]
        agent.batch_rng.bit_generator.state = header["rng"]["f23_batches"]
        return agent
