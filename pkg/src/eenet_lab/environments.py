"""Bandit environments.

Synthetic environments draw unit-norm arms and score them with a hidden
function of their projection onto a unit vector ``a``. Dataset environments
turn a CSV into rounds, either by the disjoint (block) encoding of a
classification row or by mixing one positive row with sampled negatives.

Every round is keyed on ``(seed, t)``, so round ``t`` is the same regardless of
what was played before it, and agents run against identical rounds.
"""

from dataclasses import dataclass
import csv
import io
from pathlib import Path

import numpy as np

from .bandit_core import RoundContext, clip_reward
from .rng import make_rng

H_KINDS = ("linear", "quadratic", "cosine")
DATASET_KINDS = ("classification_disjoint", "positive_vs_negatives")


class DatasetError(ValueError):
    pass


def _unit_rows(X):
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DatasetError("cannot normalise an all-zero arm vector")
    return X / norms


def expected_reward(kind, proj):
    if kind == "linear":
        return (proj + 1.0) / 2.0
    if kind == "quadratic":
        return proj ** 2
    if kind == "cosine":
        return (np.cos(3.0 * proj) + 1.0) / 2.0
    raise ValueError(f"unknown h_kind {kind!r}; expected one of {H_KINDS}")


@dataclass
class SyntheticSpec:
    d: int = 10
    n: int = 10
    h_kind: str = "quadratic"
    noise_sd: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.h_kind not in H_KINDS:
            raise ValueError(f"unknown h_kind {self.h_kind!r}; expected one of {H_KINDS}")
        if self.d < 1 or self.n < 1:
            raise ValueError("d and n must be positive")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")


class SyntheticEnvironment:
    """Arms uniform on the unit sphere; rewards ``clip(h(x) + N(0, sd^2), 0, 1)``.

    h depends on ``x . a`` with a seeded unit vector ``a``:
    linear ``(x.a + 1)/2``, quadratic ``(x.a)^2``, cosine ``(cos(3 x.a) + 1)/2``.
    Gaussian noise followed by clipping keeps rewards bounded at the cost of
    a slight bias in the realised mean near 0 and 1.
    """

    def __init__(self, spec):
        self.spec = spec
        a = make_rng(spec.seed, "env.hidden").normal(size=spec.d)
        self.a = a / np.linalg.norm(a)

    @property
    def dim(self):
        return self.spec.d

    @property
    def n_arms(self):
        return self.spec.n

    def round(self, t):
        if t < 1:
            raise ValueError("round index starts at 1")
        rng = make_rng(self.spec.seed, "env.arms", t)
        X = _unit_rows(rng.normal(size=(self.spec.n, self.spec.d)))
        h = expected_reward(self.spec.h_kind, X @ self.a)
        return RoundContext(t, X, h)

    def reward(self, round_ctx, chosen):
        h = round_ctx.hidden_expected_rewards[chosen]
        if self.spec.noise_sd == 0.0:
            return float(h)
        eps = make_rng(self.spec.seed, "env.noise", round_ctx.t).normal(0.0, self.spec.noise_sd)
        return float(min(max(h + eps, 0.0), 1.0))


def synth_round(spec, t):
    return SyntheticEnvironment(spec).round(t)


@dataclass
class DatasetSpec:
    path: str
    kind: str = "classification_disjoint"
    n: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}; expected one of {DATASET_KINDS}")
        if self.n < 1:
            raise ValueError("n must be positive")


def _is_number(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_csv_rows(path):
    """Parse a numeric CSV; returns (features, last_column) arrays.

    The first line is a header when its first token is not numeric. Every
    data row must have the same number of columns.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc.strerror}") from None
    reader = csv.reader(io.StringIO(text), quoting=csv.QUOTE_NONE)
    rows, width = [], None
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and not _is_number(row[0].strip()):
            continue
        if width is None:
            width = len(row)
            if width < 2:
                raise DatasetError(f"row {lineno}: need at least one feature and a label")
        if len(row) != width:
            raise DatasetError(f"row {lineno}: expected {width} columns, got {len(row)}")
        try:
            rows.append([float(c) for c in row])
        except ValueError as exc:
            raise DatasetError(f"row {lineno}: {exc}") from None
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    data = np.asarray(rows)
    return data[:, :-1], data[:, -1]


class DatasetEnvironment:
    """Rounds built from a CSV of ``d`` feature columns plus a label column.

    classification_disjoint: the label is a class in ``[0, n)``. Round ``t``
    takes the row at shuffled position ``t`` (cycling through the data) and
    emits ``n`` arms, arm ``i`` holding the row in block ``i`` of an ``n*d``
    zero vector, then normalised. The arm of the true class has reward 1.

    positive_vs_negatives: the label is a reward bit. Each round holds one
    positive row and ``n - 1`` negatives drawn without replacement, in a
    seeded random arm order.
    """

    def __init__(self, spec):
        self.spec = spec
        features, labels = read_csv_rows(spec.path)
        self._load(features, labels)

    def _load(self, features, labels):
        spec = self.spec
        self.raw_dim = features.shape[1]
        if spec.kind == "classification_disjoint":
            classes = labels.astype(int)
            bad = np.flatnonzero((classes != labels) | (classes < 0) | (classes >= spec.n))
            if bad.size:
                row = int(bad[0])
                raise DatasetError(
                    f"data row {row + 1}: class {labels[row]!r} is not an integer in [0, {spec.n})"
                )
            if np.any(np.linalg.norm(features, axis=1) == 0.0):
                row = int(np.flatnonzero(np.linalg.norm(features, axis=1) == 0.0)[0])
                raise DatasetError(f"data row {row + 1}: all-zero feature vector")
            self.features = features
            self.classes = classes
            self.order = make_rng(spec.seed, "dataset.shuffle").permutation(len(classes))
        else:
            bits = labels
            bad = np.flatnonzero((bits != 0.0) & (bits != 1.0))
            if bad.size:
                row = int(bad[0])
                raise DatasetError(f"data row {row + 1}: reward {bits[row]!r} is not 0 or 1")
            self.positives = features[bits == 1.0]
            self.negatives = features[bits == 0.0]
            if len(self.positives) == 0:
                raise DatasetError("positive_vs_negatives needs at least one reward-1 row")
            if len(self.negatives) < spec.n - 1:
                raise DatasetError(
                    f"need at least {spec.n - 1} reward-0 rows, found {len(self.negatives)}"
                )
            self.order = make_rng(spec.seed, "dataset.shuffle").permutation(len(self.positives))

    @property
    def dim(self):
        if self.spec.kind == "classification_disjoint":
            return self.spec.n * self.raw_dim
        return self.raw_dim

    @property
    def n_arms(self):
        return self.spec.n

    def round(self, t):
        if t < 1:
            raise ValueError("round index starts at 1")
        n, d = self.spec.n, self.raw_dim
        if self.spec.kind == "classification_disjoint":
            row = self.order[(t - 1) % len(self.order)]
            X = np.zeros((n, n * d))
            for i in range(n):
                X[i, i * d:(i + 1) * d] = self.features[row]
            h = np.zeros(n)
            h[self.classes[row]] = 1.0
            return RoundContext(t, _unit_rows(X), h)
        rng = make_rng(self.spec.seed, "dataset.round", t)
        pos = self.positives[self.order[(t - 1) % len(self.order)]]
        neg_idx = rng.choice(len(self.negatives), size=n - 1, replace=False)
        slot = int(rng.integers(n))
        X = np.empty((n, d))
        h = np.zeros(n)
        rest = iter(neg_idx)
        for i in range(n):
            if i == slot:
                X[i] = pos
                h[i] = 1.0
            else:
                X[i] = self.negatives[next(rest)]
        return RoundContext(t, _unit_rows(X), h)

    def reward(self, round_ctx, chosen):
        return clip_reward(round_ctx.hidden_expected_rewards[chosen], "dataset reward")


def dataset_load(spec):
    return DatasetEnvironment(spec)


def dataset_round(env, t):
    return env.round(t)


def make_environment(cfg, seed):
    """Build an environment from a config mapping; ``seed`` is the run seed."""
    cfg = dict(cfg)
    kind = cfg.pop("kind", "synthetic")
    if kind == "synthetic":
        return SyntheticEnvironment(SyntheticSpec(seed=seed, **cfg))
    if kind == "dataset":
        return DatasetEnvironment(DatasetSpec(seed=seed, **cfg))
    raise ValueError(f"unknown environment kind {kind!r}")


def gen_dataset(kind, rows, out, d=4, n_classes=3, seed=0):
    """Write a synthetic CSV usable by ``DatasetEnvironment``.

    classification: Gaussian clusters around random class centres, labels
    in the last column. positive_vs_negatives: rows labelled 1 when the
    first feature exceeds a threshold that makes roughly 10% positives.
    """
    rng = make_rng(seed, "gen_dataset")
    if rows < 1:
        raise ValueError("rows must be positive")
    if kind == "classification":
        centres = rng.normal(size=(n_classes, d)) * 2.0
        labels = rng.integers(n_classes, size=rows)
        X = centres[labels] + rng.normal(size=(rows, d))
    elif kind == "positive_vs_negatives":
        X = rng.normal(size=(rows, d))
        labels = (X[:, 0] > 1.2816).astype(int)
        if labels.sum() == 0:
            labels[0] = 1
    else:
        raise ValueError("kind must be 'classification' or 'positive_vs_negatives'")
    header = ",".join([f"x{j}" for j in range(d)] + ["label"])
    lines = [header] + [
        ",".join(["%.17g" % v for v in X[i]] + [str(int(labels[i]))]) for i in range(rows)
    ]
    Path(out).write_text("\n".join(lines) + "\n")
    return Path(out)
