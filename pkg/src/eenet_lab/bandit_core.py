"""Contextual-bandit domain model: rounds, the agent protocol, regret accounting."""

from dataclasses import dataclass
import warnings

import numpy as np

LEDGER_HEADER = "t,chosen_h,optimal_h,inst_regret,cum_regret"


class ProtocolError(RuntimeError):
    """An agent method was called out of the select -> observe -> train order."""


@dataclass(frozen=True)
class Arm:
    index: int
    features: np.ndarray


class RoundContext:
    """The ``n`` arms presented in round ``t``.

    ``features`` is an (n, d) array; row ``i`` is arm ``i``. The optional
    ``hidden_expected_rewards`` belong to the environment and are only read by
    the regret ledger.
    """

    def __init__(self, t, features, hidden_expected_rewards=None):
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise ValueError("features must be an (n, d) array")
        if t < 1:
            raise ValueError("round index starts at 1")
        self.t = int(t)
        self.features = features
        if hidden_expected_rewards is not None:
            hidden_expected_rewards = np.asarray(hidden_expected_rewards, dtype=np.float64)
            if hidden_expected_rewards.shape != (features.shape[0],):
                raise ValueError("need one hidden expected reward per arm")
        self.hidden_expected_rewards = hidden_expected_rewards

    @property
    def n_arms(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def arms(self):
        return [Arm(i, self.features[i]) for i in range(self.n_arms)]


@dataclass(frozen=True)
class RewardObservation:
    chosen_index: int
    reward: float

    def __post_init__(self):
        if not 0.0 <= self.reward <= 1.0:
            raise ValueError(f"reward {self.reward} outside [0, 1]")


def clip_reward(r, source="reward"):
    """Clip to [0, 1], warning when the value had to move."""
    if r < 0.0 or r > 1.0:
        warnings.warn(f"{source} {r!r} outside [0, 1]; clipped", stacklevel=2)
        return float(min(max(r, 0.0), 1.0))
    return float(r)


def argmax_first(scores):
    """Index of the maximum, ties going to the lowest index."""
    scores = np.asarray(scores)
    if scores.size == 0:
        raise ValueError("cannot select from an empty round")
    return int(np.argmax(scores))


class Agent:
    """Base class enforcing the per-round select -> observe -> train protocol.

    Subclasses implement ``_select``, ``_observe`` and ``_train``.
    """

    def __init__(self):
        self._phase = "idle"
        self._pending = None

    def select(self, round_ctx):
        if self._phase == "selected":
            raise ProtocolError("select called twice without observe")
        if self._phase == "observed":
            raise ProtocolError("select called before train for the previous round")
        if round_ctx.n_arms == 0:
            raise ValueError("cannot select from an empty round")
        choice = int(self._select(round_ctx))
        self._pending = (round_ctx.t, choice)
        self._phase = "selected"
        return choice

    def observe(self, round_ctx, observation):
        if self._phase != "selected":
            raise ProtocolError("observe must follow exactly one select")
        t, choice = self._pending
        if round_ctx.t != t or observation.chosen_index != choice:
            raise ProtocolError("observation does not match the pending selection")
        self._observe(round_ctx, observation)
        self._phase = "observed"

    def train(self, t):
        if self._phase != "observed":
            raise ProtocolError("train must follow observe")
        if t != self._pending[0]:
            raise ProtocolError(f"train({t}) does not match round {self._pending[0]}")
        report = self._train(t)
        self._phase = "idle"
        return report

    def _select(self, round_ctx):
        raise NotImplementedError

    def _observe(self, round_ctx, observation):
        pass

    def _train(self, t):
        return None


class FirstArmAgent(Agent):
    """Always plays arm 0."""

    def _select(self, round_ctx):
        return 0


class GreedyAgent(Agent):
    """Plays the argmax of a fixed scoring function ``score_fn(features)``."""

    def __init__(self, score_fn):
        super().__init__()
        self.score_fn = score_fn

    def _select(self, round_ctx):
        return argmax_first(self.score_fn(round_ctx.features))


class RegretLedger:
    """Per-round pseudo regret against the environment's expected rewards."""

    def __init__(self):
        self.t = []
        self.chosen_h = []
        self.optimal_h = []
        self.inst_regret = []
        self.cum_regret = []

    def __len__(self):
        return len(self.t)

    def record(self, round_ctx, chosen_index):
        h = round_ctx.hidden_expected_rewards
        if h is None:
            raise ValueError("round has no hidden expected rewards; cannot account regret")
        best = float(np.max(h))
        got = float(h[chosen_index])
        inst = best - got
        prev = self.cum_regret[-1] if self.cum_regret else 0.0
        self.t.append(round_ctx.t)
        self.chosen_h.append(got)
        self.optimal_h.append(best)
        self.inst_regret.append(inst)
        self.cum_regret.append(prev + inst)
        return self

    @property
    def final_regret(self):
        return self.cum_regret[-1] if self.cum_regret else 0.0

    def to_csv(self):
        lines = [LEDGER_HEADER]
        for row in zip(self.t, self.chosen_h, self.optimal_h, self.inst_regret, self.cum_regret):
            lines.append("%d,%s,%s,%s,%s" % (row[0], *(fmt_float(v) for v in row[1:])))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        ledger = cls()
        rows = text.strip().splitlines()
        if rows[0] != LEDGER_HEADER:
            raise ValueError("not a regret ledger CSV")
        for line in rows[1:]:
            t, ch, opt, inst, cum = line.split(",")
            ledger.t.append(int(t))
            ledger.chosen_h.append(float(ch))
            ledger.optimal_h.append(float(opt))
            ledger.inst_regret.append(float(inst))
            ledger.cum_regret.append(float(cum))
        return ledger


def record_round(ledger, round_ctx, chosen_index):
    return ledger.record(round_ctx, chosen_index)


def fmt_float(v):
    return "%.17g" % v
