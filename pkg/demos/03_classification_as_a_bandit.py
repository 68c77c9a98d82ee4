"""
A classification dataset as a bandit
====================================

Each row becomes one round with one arm per class. Arm k places the row's
features in block k of a zero vector, and pays 1 only for the true class.
"""

import tempfile
from pathlib import Path

from eenet_lab.environments import gen_dataset
from eenet_lab.experiment import ExperimentConfig, run_experiment

tmp = Path(tempfile.mkdtemp())
data = gen_dataset("classification", 600, tmp / "clusters.csv", d=4, n_classes=4, seed=3)

env = {"kind": "dataset", "path": str(data), "n": 4}
for name, agent in {
    "LinUCB": {"kind": "linucb", "alpha": 0.1},
    "EE-Net": {"kind": "eenet", "preset": "desk", "p_mode": "binary", "augmentation_cr": 0.1},
}.items():
    cfg = ExperimentConfig.from_dict({"environment": env, "agent": agent, "T": 600, "runs": 1})
    summary, _ = run_experiment(cfg, tmp / name)
    # regret here counts misclassified rounds; the clusters are close to
    # linearly separable, so the linear agent has the easier job
    print(f"{name:7s} mistakes in 600 rounds: {summary.final_mean:.0f}")

print(f"per-round ledgers written under {tmp}")
