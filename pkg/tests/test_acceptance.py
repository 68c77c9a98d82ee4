"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The regret comparisons (criteria 6 to 10) share experiment runs through a
session cache; on one core the whole file takes roughly a quarter of an hour.
Run it alone with ``pytest tests/test_acceptance.py -v``.
"""

import functools
import time

import numpy as np
import pytest

from eenet_lab.bandit_core import RewardObservation, RoundContext
from eenet_lab.baselines import (
    KernelState,
    NeuralEpsilonAgent,
    NeuralTSAgent,
    NeuralUCBAgent,
    RidgeState,
    rbf,
)
from eenet_lab.eenet_agent import EeNetAgent, EeNetConfig, phi_batch
from eenet_lab.environments import DatasetEnvironment, DatasetSpec, SyntheticEnvironment, SyntheticSpec, gen_dataset
from eenet_lab.experiment import ExperimentConfig, run_experiment
from eenet_lab.nn_core import grad_params, init_network, squared_loss, train_squared
from eenet_lab.rng import make_rng

from conftest import fd_gradient, fd_matches, make_fixture_f1, unit_rows


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail
    return emit


# -- shared regret experiments ----------------------------------------------

T, RUNS = 2000, 5
EENET = {"kind": "eenet", "preset": "desk", "f3_mode": "hybrid", "switch_round": 500}
NEURAL_EPS = {"kind": "neural_epsilon", "preset": "desk", "epsilon": 0.1}
LINUCB_ALPHAS = (0.01, 0.1, 1.0)


def env_spec(h_kind):
    return {"kind": "synthetic", "d": 10, "n": 10, "h_kind": h_kind, "noise_sd": 0.05}


def experiment_config(h_kind, agent):
    return ExperimentConfig.from_dict(
        {"environment": env_spec(h_kind), "agent": agent, "T": T, "runs": RUNS, "base_seed": 0})


@functools.lru_cache(maxsize=None)
def _run(h_kind, agent_items, out_dir):
    start = time.perf_counter()
    summary, _ = run_experiment(experiment_config(h_kind, dict(agent_items)), out_dir)
    return summary, time.perf_counter() - start


def run(h_kind, agent, out_dir=None):
    return _run(h_kind, tuple(sorted(agent.items())), out_dir)


def best_linucb(h_kind):
    finals = {a: run(h_kind, {"kind": "linucb", "alpha": a})[0].final_mean for a in LINUCB_ALPHAS}
    alpha = min(finals, key=lambda a: (finals[a], LINUCB_ALPHAS.index(a)))
    return alpha, finals[alpha]


@pytest.fixture(scope="session")
def c6_dirs(tmp_path_factory):
    return tmp_path_factory.mktemp("c6_first"), tmp_path_factory.mktemp("c6_second")


# -- criteria -------------------------------------------------------------------

def test_criterion_01_gradient_exactness(report):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    failures = 0
    for k in range(50):
        depth = 2 + k % 2
        widths = (int(rng.integers(1, 51)), *rng.integers(1, 51, size=depth - 1).tolist(), 1)
        net = init_network(widths, rng=make_rng(k, "acceptance.c1"))
        x = rng.normal(size=widths[0])
        failures += not fd_matches(grad_params(net, x), fd_gradient(net, x), rel=1e-4, abs_tol=1e-8)
    elapsed = time.perf_counter() - start
    report(1, failures == 0 and elapsed < 10.0,
           f"{50 - failures}/50 pairs match finite differences, {elapsed:.1f}s (limit 10s)")


def test_criterion_02_phi_unit_norm(report):
    rng = np.random.default_rng(202)
    G = rng.normal(size=(1000, 300)) * rng.lognormal(0, 3, size=(1000, 1))
    X = unit_rows(rng, 1000, 10)
    out, deg = phi_batch(G, X, "normalize_concat")
    err = np.max(np.abs(np.linalg.norm(out, axis=1) - 1.0))
    report(2, not deg.any() and err <= 1e-9, f"max | |phi| - 1 | = {err:.2e} over 1000 pairs (limit 1e-9)")


def test_criterion_03_training_convergence(report):
    X, y = make_fixture_f1()
    start = time.perf_counter()
    net = init_network((5, 100, 1), rng=make_rng(0, "f1.init"))
    initial = squared_loss(net, X, y)
    final = train_squared(net, X, y, 0.001, 100)
    elapsed = time.perf_counter() - start
    report(3, final <= 0.1 * initial and elapsed < 30.0,
           f"loss {initial:.4g} -> {final:.4g} (ratio {final / initial:.4f}, limit 0.1), {elapsed:.2f}s")


def test_criterion_04_baseline_oracles(report):
    rng = np.random.default_rng(404)
    ridge = RidgeState(10, lam=1.0)
    for x in unit_rows(rng, 100, 10):
        ridge.update(x, float(rng.uniform()))
    lin_err = np.linalg.norm(ridge.A_inv - np.linalg.inv(ridge.A), "fro")

    ks = KernelState(10, lam=1.0, gamma=1.0)
    C = unit_rows(rng, 3, 10)
    r = rng.uniform(size=3)
    for x, y in zip(C, r):
        ks.update(x, y)
    Q = unit_rows(rng, 20, 10)
    K = rbf(C, C, 1.0) + np.eye(3)
    kq = rbf(Q, C, 1.0)
    mean = kq @ np.linalg.solve(K, r)
    var = 1.0 - np.sum(kq * np.linalg.solve(K, kq.T).T, axis=1)
    m, v = ks.posterior(Q)
    k_err = max(np.max(np.abs(m - mean)), np.max(np.abs(v - var)))
    report(4, lin_err <= 1e-8 and k_err <= 1e-8,
           f"LinUCB inverse Frobenius error {lin_err:.2e}, KernelUCB mean/variance error {k_err:.2e} (limit 1e-8)")


def test_criterion_05_degeneration_identities(report):
    d, n = 10, 10
    env = SyntheticEnvironment(SyntheticSpec(d=d, n=n, h_kind="quadratic", seed=5))
    # one trained f1 snapshot shared by every agent
    f1 = init_network((d, 100, 1), rng=make_rng(5, "f1.init"))
    rng = np.random.default_rng(5)
    Xs = unit_rows(rng, 200, d)
    train_squared(f1, Xs, (Xs @ env.a) ** 2, 0.01, 200)
    kw = dict(hidden=(100,), lr=0.001, iters=20, seed=5, f1_init=f1)
    agents = {
        "NeuralUCB(nu=0)": NeuralUCBAgent(d, nu=0.0, **kw),
        "NeuralTS(nu=0)": NeuralTSAgent(d, nu=0.0, **kw),
        "Neural-Epsilon(eps=0)": NeuralEpsilonAgent(d, epsilon=0.0, **kw),
        "EE-Net(linear, w2=0, K2=0)": EeNetAgent(
            EeNetConfig(f3_mode="linear", w2=0.0, K2=0, K1=20, lr1=0.001), d, seed=5, f1_init=f1),
    }
    picks = {name: [] for name in agents}
    for t in range(1, 201):
        ctx = env.round(t)
        visible = RoundContext(t, ctx.features)
        for name, agent in agents.items():
            i = agent.select(visible)
            agent.observe(visible, RewardObservation(i, env.reward(ctx, i)))
            agent.train(t)
            picks[name].append(i)
    sequences = list(picks.values())
    same = all(s == sequences[0] for s in sequences[1:])
    distinct = len(set(sequences[0]))
    report(5, same, f"4 agents {'share' if same else 'do not share'} one 200-round selection sequence "
                    f"({distinct} distinct arms chosen)")


def test_criterion_06_regret_separation(report, c6_dirs):
    ee, ee_time = run("quadratic", EENET, str(c6_dirs[0]))
    eps, _ = run("quadratic", NEURAL_EPS)
    alpha, lin = best_linucb("quadratic")
    a_ok = ee.final_mean <= 0.9 * eps.final_mean
    b_ok = ee.final_mean <= 0.8 * lin
    report(6, a_ok and b_ok,
           f"EE-Net {ee.final_mean:.1f} (sd {ee.final_sd:.1f}, {ee_time:.0f}s), "
           f"Neural-Epsilon {eps.final_mean:.1f} (ratio {ee.final_mean / eps.final_mean:.3f}, limit 0.9), "
           f"LinUCB(alpha={alpha}) {lin:.1f} (ratio {ee.final_mean / lin:.3f}, limit 0.8)")


def test_criterion_07_sublinearity(report, c6_dirs):
    ee, _ = run("quadratic", EENET, str(c6_dirs[0]))
    early = ee.mean_cum_regret[199] / 200
    late = ee.mean_cum_regret[1999] / 2000
    report(7, late < 0.6 * early,
           f"R(2000)/2000 = {late:.4f}, R(200)/200 = {early:.4f} (ratio {late / early:.3f}, limit 0.6)")


def test_criterion_08_linear_sanity(report):
    ee, _ = run("linear", EENET)
    alpha, lin = best_linucb("linear")
    report(8, lin <= 1.5 * ee.final_mean,
           f"LinUCB(alpha={alpha}) {lin:.1f} vs EE-Net {ee.final_mean:.1f} "
           f"(ratio {lin / ee.final_mean:.3f}, limit 1.5)")


def test_criterion_09_ablations(report):
    signed, _ = run("quadratic", EENET)
    absolute, _ = run("quadratic", {**EENET, "label_mode": "absolute"})
    relu, _ = run("quadratic", {**EENET, "label_mode": "relu"})
    neural, _ = run("quadratic", {**EENET, "f3_mode": "neural"})
    labels_ok = signed.final_mean <= 1.05 * min(absolute.final_mean, relu.final_mean)
    sd_ok = signed.final_sd <= neural.final_sd
    report(9, labels_ok and sd_ok,
           f"signed {signed.final_mean:.1f}, absolute {absolute.final_mean:.1f}, relu {relu.final_mean:.1f} "
           f"(limit 1.05 x best ablation); hybrid sd {signed.final_sd:.1f} vs neural-f3 sd {neural.final_sd:.1f}")


def test_criterion_10_determinism(report, c6_dirs):
    first, second = c6_dirs
    run("quadratic", EENET, str(first))
    # a second, uncached execution of the same config
    run_experiment(experiment_config("quadratic", EENET), str(second))
    files_a = {p.name: p.read_bytes() for p in sorted(first.iterdir())}
    files_b = {p.name: p.read_bytes() for p in sorted(second.iterdir())}
    same = files_a == files_b and len(files_a) == RUNS + 2
    report(10, same, f"{len(files_a)} output files {'byte-identical' if same else 'differ'} across two executions")


def test_criterion_11_augmentation_accounting(report, tmp_path):
    n = 10
    path = gen_dataset("classification", 400, tmp_path / "classes.csv", d=4, n_classes=n, seed=11)
    env = DatasetEnvironment(DatasetSpec(str(path), "classification_disjoint", n=n, seed=11))
    cfg = EeNetConfig(f1_hidden=(20,), f2_hidden=(20,), f3_hidden=(10,), K1=5, K2=5, K3=5,
                      p_mode="binary", augmentation_cr=0.1, phi_mode="normalize_concat")
    agent = EeNetAgent(cfg, env.dim, seed=11)
    bad = []
    counts = {0.0: 0, 1.0: 0}
    for t in range(1, 301):
        ctx = env.round(t)
        visible = RoundContext(t, ctx.features)
        before = len(agent.f2_labels)
        i = agent.select(visible)
        r = env.reward(ctx, i)
        agent.observe(visible, RewardObservation(i, r))
        agent.train(t)
        grew = len(agent.f2_labels) - before
        counts[r] += 1
        if grew != (n if r == 0.0 else 1):
            bad.append((t, r, grew))
    ok = not bad and counts[0.0] > 0 and counts[1.0] > 0
    report(11, ok, f"{counts[0.0]} reward-0 rounds grew the f2 buffer by {n}, "
                   f"{counts[1.0]} reward-1 rounds by 1, {len(bad)} violations")


def test_criterion_12_uniform_historical_draw(report):
    cfg = EeNetConfig(f1_hidden=(2,), f2_hidden=(2,), f3_hidden=(2,), K1=1, K2=1, K3=1,
                      f3_mode="neural", parameter_draw="uniform_historical", history_cap=4,
                      phi_mode="normalize_concat")
    agent = EeNetAgent(cfg, dim=2, seed=12)
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    pair_counts, f3_counts = np.zeros(4), np.zeros(4)
    for t in range(1, 10004):
        ctx = RoundContext(t, X)
        i = agent.select(ctx)
        agent.observe(ctx, RewardObservation(i, 0.5))
        agent.train(t)
        if t > 3:  # from here on the history holds exactly 4 checkpoints
            a, b = agent.history.last_draw
            pair_counts[a] += 1
            f3_counts[b] += 1
    freq = np.concatenate([pair_counts, f3_counts]) / 10000
    worst = np.max(np.abs(freq - 0.25))
    report(12, worst <= 0.02 and len(agent.history) == 4,
           f"draw frequencies {np.round(pair_counts / 10000, 4).tolist()} (pairs), "
           f"{np.round(f3_counts / 10000, 4).tolist()} (f3); max deviation {worst:.4f} (limit 0.02)")
