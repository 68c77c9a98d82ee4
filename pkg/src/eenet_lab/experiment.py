"""Seeded multi-run experiments, aggregation, grid sweeps and output files.

A config is a flat JSON document::

    {
      "environment": {"kind": "synthetic", "d": 10, "n": 10,
                      "h_kind": "quadratic", "noise_sd": 0.05},
      "agent": {"kind": "eenet", "f3_mode": "hybrid"},
      "T": 2000, "runs": 5, "base_seed": 0, "output_dir": "out"
    }

Run ``r`` (0-based) seeds both the environment and the agent with
``base_seed + r``; agents and environments draw from separate named streams.
"""

from concurrent.futures import ThreadPoolExecutor
import copy
from dataclasses import dataclass, field, fields
import itertools
import json
import logging
import os
from pathlib import Path
import time

import numpy as np

from .bandit_core import FirstArmAgent, RegretLedger, RewardObservation, RoundContext, fmt_float
from .baselines import (
    KernelUCBAgent,
    LinUCBAgent,
    NeuralEpsilonAgent,
    NeuralTSAgent,
    NeuralUCBAgent,
)
from .eenet_agent import EeNetAgent, EeNetConfig
from .environments import make_environment

log = logging.getLogger(__name__)

AGENT_KINDS = ("eenet", "linucb", "kernelucb", "neural_epsilon", "neuralucb", "neuralts", "first_arm")
THREADS_ENV = "EENET_LAB_THREADS"

# Training schedules for neural agents, selected with ``"preset": <name>`` in
# the agent spec. Explicit keys in the spec override preset values.
# "desk" refits every 10 rounds, continuing from the current parameters, so a
# 2000-round run takes seconds rather than minutes on one core. It also
# projects f1's gradient to 50 dimensions rather than 10; at 10 the random
# projection keeps too little of the gradient for f2 to be useful. f3 uses a
# larger step (0.1): a hybrid f3 gets its first fit only at the switch round,
# and 100 steps at 0.01 leave it close to its random initial ranking.
_DESK_NEURAL = {"train_every": 10, "warm_start": True, "iters": 50, "lr": 0.001}
PRESETS = {
    "desk": {
        "eenet": {"train_every": 10, "warm_start": True, "K1": 50, "K2": 50, "K3": 100,
                  "lr1": 0.001, "lr2": 0.001, "lr3": 0.1, "phi_k": 50},
        "neural_epsilon": _DESK_NEURAL,
        "neuralucb": _DESK_NEURAL,
        "neuralts": _DESK_NEURAL,
    },
}


class ConfigError(ValueError):
    pass


class RunError(RuntimeError):
    def __init__(self, run, t, cause):
        super().__init__(f"run {run}, round {t}: {type(cause).__name__}: {cause}")
        self.run, self.t = run, t


@dataclass
class ExperimentConfig:
    environment: dict
    agent: dict
    T: int = 1000
    runs: int = 1
    base_seed: int = 0
    output_dir: str = None
    record_timings: bool = False
    raw: dict = field(default=None, repr=False)

    def __post_init__(self):
        if not isinstance(self.T, int) or self.T < 1:
            raise ConfigError("T must be an integer >= 1")
        if not isinstance(self.runs, int) or self.runs < 1:
            raise ConfigError("runs must be an integer >= 1")
        if not isinstance(self.base_seed, int) or self.base_seed < 0:
            raise ConfigError("base_seed must be a non-negative integer")
        kind = self.agent.get("kind")
        if kind not in AGENT_KINDS:
            raise ConfigError(f"agent.kind must be one of {AGENT_KINDS}, got {kind!r}")
        if self.raw is None:
            self.raw = self.to_dict()

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)} - {"raw"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("environment", "agent"):
            if not isinstance(doc.get(key), dict):
                raise ConfigError(f"config needs an object under {key!r}")
        body = copy.deepcopy(doc)
        return cls(**body, raw=copy.deepcopy(doc))

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self):
        return {
            "environment": copy.deepcopy(self.environment),
            "agent": copy.deepcopy(self.agent),
            "T": self.T,
            "runs": self.runs,
            "base_seed": self.base_seed,
            "output_dir": self.output_dir,
            "record_timings": self.record_timings,
        }


def expand_preset(spec):
    """Agent spec with its ``preset`` (if any) merged underneath explicit keys."""
    spec = dict(spec)
    name = spec.pop("preset", None)
    if name is None:
        return spec
    kind = spec.get("kind")
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    if kind not in PRESETS[name]:
        raise ConfigError(f"preset {name!r} does not apply to agent {kind!r}")
    return {**PRESETS[name][kind], **spec}


def make_agent(spec, dim, seed):
    spec = expand_preset(spec)
    kind = spec.pop("kind")
    try:
        if kind == "eenet":
            return EeNetAgent(EeNetConfig(**spec), dim, seed)
        if kind == "linucb":
            return LinUCBAgent(dim, **spec)
        if kind == "kernelucb":
            return KernelUCBAgent(dim, **spec)
        if kind == "neural_epsilon":
            return NeuralEpsilonAgent(dim, seed=seed, **_neural_kw(spec))
        if kind == "neuralucb":
            return NeuralUCBAgent(dim, seed=seed, **_neural_kw(spec))
        if kind == "neuralts":
            return NeuralTSAgent(dim, seed=seed, **_neural_kw(spec))
        if kind == "first_arm":
            return FirstArmAgent(**spec)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad parameters for agent {kind!r}: {exc}") from None
    raise ConfigError(f"unknown agent kind {kind!r}")


def _neural_kw(spec):
    if "hidden" in spec:
        spec["hidden"] = tuple(spec["hidden"])
    return spec


def run_single(config, run):
    """One seeded trajectory; returns ``(ledger, wall_seconds)``."""
    seed = config.base_seed + run
    try:
        env = make_environment(config.environment, seed)
        agent = make_agent(config.agent, env.dim, seed)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    ledger = RegretLedger()
    start = time.perf_counter()
    for t in range(1, config.T + 1):
        try:
            ctx = env.round(t)
            visible = RoundContext(t, ctx.features)
            i = agent.select(visible)
            r = env.reward(ctx, i)
            agent.observe(visible, RewardObservation(i, r))
            agent.train(t)
            ledger.record(ctx, i)
        except Exception as exc:
            raise RunError(run, t, exc) from exc
    return ledger, time.perf_counter() - start


@dataclass
class RunSummary:
    mean_cum_regret: np.ndarray
    sd_cum_regret: np.ndarray
    wall_times: list
    config_echo: dict

    @property
    def final_mean(self):
        return float(self.mean_cum_regret[-1])

    @property
    def final_sd(self):
        return float(self.sd_cum_regret[-1])


def aggregate(ledgers, wall_times, config_echo):
    cum = np.array([l.cum_regret for l in ledgers])
    mean = cum.mean(axis=0)
    sd = cum.std(axis=0, ddof=1) if len(ledgers) > 1 else np.zeros(cum.shape[1])
    return RunSummary(mean, sd, list(wall_times), config_echo)


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_experiment(config, out_dir=None, threads=None):
    """Execute all runs, aggregate, and write outputs when a directory is known."""
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or config.runs == 1:
        results = [run_single(config, r) for r in range(config.runs)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: run_single(config, r), range(config.runs)))
    ledgers = [res[0] for res in results]
    summary = aggregate(ledgers, [res[1] for res in results], config.raw)
    out_dir = out_dir if out_dir is not None else config.output_dir
    if out_dir is not None:
        write_outputs(summary, ledgers, out_dir, config.record_timings)
    return summary, ledgers


def summary_csv(summary):
    lines = ["t,mean_cum_regret,sd_cum_regret"]
    for t, (m, s) in enumerate(zip(summary.mean_cum_regret, summary.sd_cum_regret), start=1):
        lines.append(f"{t},{fmt_float(m)},{fmt_float(s)}")
    return "\n".join(lines) + "\n"


def summary_json(summary, record_timings=False):
    doc = {
        "config": summary.config_echo,
        "final_mean_cum_regret": float(fmt_float(summary.final_mean)),
        "final_sd_cum_regret": float(fmt_float(summary.final_sd)),
    }
    if record_timings:
        doc["wall_seconds"] = [float(fmt_float(w)) for w in summary.wall_times]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_outputs(summary, ledgers, out_dir, record_timings=False):
    """Write ``run_<r>.csv``, ``summary.csv`` and ``summary.json``; returns the paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for r, ledger in enumerate(ledgers):
            p = out / f"run_{r}.csv"
            p.write_text(ledger.to_csv())
            paths.append(p)
        p = out / "summary.csv"
        p.write_text(summary_csv(summary))
        paths.append(p)
        p = out / "summary.json"
        p.write_text(summary_json(summary, record_timings))
        paths.append(p)
    except OSError as exc:
        raise OSError(f"cannot write outputs to {out}: {exc}") from exc
    return paths


def _set_path(doc, dotted, value):
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            raise ConfigError(f"unknown grid key {dotted!r}")
        node = node[k]
    node[keys[-1]] = value


_TOP_LEVEL_GRID = {"T", "runs", "base_seed"}
_AGENT_FIELDS = {
    "eenet": {f.name for f in fields(EeNetConfig)},
    "linucb": {"alpha", "lam"},
    "kernelucb": {"lam", "nu", "gamma", "cap"},
    "neural_epsilon": {"epsilon", "hidden", "lr", "iters", "train_every", "warm_start", "batch_size"},
    "neuralucb": {"nu", "lam", "hidden", "lr", "iters", "train_every", "warm_start", "batch_size"},
    "neuralts": {"nu", "lam", "hidden", "lr", "iters", "train_every", "warm_start", "batch_size"},
    "first_arm": set(),
}
_ENV_FIELDS = {
    "synthetic": {"d", "n", "h_kind", "noise_sd"},
    "dataset": {"path", "kind", "n"},
}


def _validate_grid_key(config, key):
    if key in _TOP_LEVEL_GRID:
        return
    head, _, rest = key.partition(".")
    if head == "agent" and (rest in _AGENT_FIELDS[config.agent["kind"]] or rest == "preset"):
        return
    if head == "environment" and rest in _ENV_FIELDS.get(config.environment.get("kind", "synthetic"), ()):
        return
    raise ConfigError(f"unknown grid key {key!r}")


def sweep(config, grid, out_dir=None, threads=None):
    """Run the Cartesian product of ``grid`` (dotted key -> list of values).

    Returns ``(best_config, best_summary, results)`` where ``results`` is a
    list of ``(point, config, summary)`` in enumeration order. The best point
    has the lowest final mean cumulative regret; ties go to the earlier point.
    """
    if not grid:
        raise ConfigError("grid is empty")
    keys = list(grid)
    for k in keys:
        _validate_grid_key(config, k)
        if not isinstance(grid[k], list) or not grid[k]:
            raise ConfigError(f"grid values for {k!r} must be a non-empty list")
    root = out_dir if out_dir is not None else config.output_dir
    out_root = Path(root) if root is not None else None
    results = []
    for idx, values in enumerate(itertools.product(*(grid[k] for k in keys))):
        point = dict(zip(keys, values))
        doc = copy.deepcopy(config.raw)
        for k, v in point.items():
            _set_path(doc, k, v)
        sub = ExperimentConfig.from_dict(doc)
        target = out_root / f"point_{idx}" if out_root is not None else None
        summary, _ = run_experiment(sub, target, threads)
        log.info("grid point %d %s: final mean regret %.6g", idx, point, summary.final_mean)
        results.append((point, sub, summary))
    best = min(range(len(results)), key=lambda i: (results[i][2].final_mean, i))
    if out_root is not None:
        index = {
            "grid": grid,
            "best_index": best,
            "points": [
                {"index": i, "point": p, "final_mean_cum_regret": float(fmt_float(s.final_mean))}
                for i, (p, _, s) in enumerate(results)
            ],
        }
        (out_root / "sweep.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return results[best][1], results[best][2], results

