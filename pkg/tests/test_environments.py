import numpy as np
import pytest

from eenet_lab.environments import (
    DatasetEnvironment,
    DatasetError,
    DatasetSpec,
    SyntheticEnvironment,
    SyntheticSpec,
    dataset_load,
    dataset_round,
    gen_dataset,
    make_environment,
    synth_round,
)


class TestSynthetic:
    @pytest.mark.parametrize("kind", ["linear", "quadratic", "cosine"])
    def test_unit_arms_and_bounded_rewards(self, kind):
        env = SyntheticEnvironment(SyntheticSpec(d=6, n=8, h_kind=kind, noise_sd=0.3, seed=1))
        for t in range(1, 40):
            c = env.round(t)
            np.testing.assert_allclose(np.linalg.norm(c.features, axis=1), 1.0, atol=1e-9)
            assert np.all((0 <= c.hidden_expected_rewards) & (c.hidden_expected_rewards <= 1))
            for i in range(c.n_arms):
                assert 0.0 <= env.reward(c, i) <= 1.0

    def test_zero_noise(self):
        env = SyntheticEnvironment(SyntheticSpec(noise_sd=0.0, seed=2))
        c = env.round(5)
        assert env.reward(c, 3) == c.hidden_expected_rewards[3]

    def test_peak_values(self):
        env = SyntheticEnvironment(SyntheticSpec(d=4, seed=3))
        a = env.a
        assert np.linalg.norm(a) == pytest.approx(1.0)
        from eenet_lab.environments import expected_reward
        assert expected_reward("quadratic", a @ a) == pytest.approx(1.0)
        assert expected_reward("linear", a @ a) == pytest.approx(1.0)
        assert expected_reward("cosine", 0.0) == pytest.approx(1.0)

    def test_deterministic(self):
        spec = SyntheticSpec(seed=4)
        a, b = synth_round(spec, 7), synth_round(spec, 7)
        assert a.features.tobytes() == b.features.tobytes()
        assert a.hidden_expected_rewards.tobytes() == b.hidden_expected_rewards.tobytes()
        assert not np.array_equal(a.features, synth_round(spec, 8).features)

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            SyntheticSpec(h_kind="cubic")


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestClassification:
    def test_disjoint_encoding(self, tmp_path):
        path = write(tmp_path, "0.6,0.8,1\n")
        env = dataset_load(DatasetSpec(str(path), "classification_disjoint", n=2))
        c = dataset_round(env, 1)
        np.testing.assert_allclose(c.features, [[0.6, 0.8, 0, 0], [0, 0, 0.6, 0.8]])
        np.testing.assert_array_equal(c.hidden_expected_rewards, [0.0, 1.0])

    def test_renormalises(self, tmp_path):
        path = write(tmp_path, "a,b,label\n3,4,0\n1,1,1\n")
        env = DatasetEnvironment(DatasetSpec(str(path), n=2, seed=3))
        for t in range(1, 5):
            c = env.round(t)
            np.testing.assert_allclose(np.linalg.norm(c.features, axis=1), 1.0, atol=1e-12)
            assert c.hidden_expected_rewards.sum() == 1.0

    def test_generated_dataset(self, tmp_path):
        path = gen_dataset("classification", 60, tmp_path / "g.csv", d=4, n_classes=3, seed=1)
        env = DatasetEnvironment(DatasetSpec(str(path), n=3, seed=0))
        assert env.dim == 12
        rounds = [env.round(t) for t in range(1, 61)]
        assert all(r.hidden_expected_rewards.sum() == 1.0 for r in rounds)

    def test_shuffle_is_deterministic(self, tmp_path):
        path = gen_dataset("classification", 30, tmp_path / "g.csv", seed=2)
        a = DatasetEnvironment(DatasetSpec(str(path), n=3, seed=5))
        b = DatasetEnvironment(DatasetSpec(str(path), n=3, seed=5))
        for t in range(1, 61):
            assert a.round(t).features.tobytes() == b.round(t).features.tobytes()

    def test_bad_class(self, tmp_path):
        path = write(tmp_path, "1,2,0\n1,2,5\n")
        with pytest.raises(DatasetError, match="row 2"):
            DatasetEnvironment(DatasetSpec(str(path), n=3))

    def test_malformed_row(self, tmp_path):
        path = write(tmp_path, "1,2,0\n1,x,1\n")
        with pytest.raises(DatasetError, match="row 2"):
            DatasetEnvironment(DatasetSpec(str(path), n=3))

    def test_ragged_row(self, tmp_path):
        path = write(tmp_path, "h1,h2,label\n1,2,0\n1,2,3,1\n")
        with pytest.raises(DatasetError, match="row 3"):
            DatasetEnvironment(DatasetSpec(str(path), n=3))


class TestPositiveVsNegatives:
    def test_round_shape(self, tmp_path):
        path = gen_dataset("positive_vs_negatives", 300, tmp_path / "p.csv", d=5, seed=4)
        env = DatasetEnvironment(DatasetSpec(str(path), "positive_vs_negatives", n=10, seed=1))
        slots = set()
        for t in range(1, 50):
            c = env.round(t)
            assert c.n_arms == 10
            assert c.hidden_expected_rewards.sum() == 1.0
            np.testing.assert_allclose(np.linalg.norm(c.features, axis=1), 1.0, atol=1e-9)
            # negatives are distinct within a round
            assert len({row.tobytes() for row in c.features}) == 10
            slots.add(int(np.argmax(c.hidden_expected_rewards)))
        assert len(slots) > 1

    def test_needs_enough_negatives(self, tmp_path):
        path = write(tmp_path, "1,0,1\n0,1,0\n")
        with pytest.raises(DatasetError, match="reward-0"):
            DatasetEnvironment(DatasetSpec(str(path), "positive_vs_negatives", n=3))

    def test_non_binary_reward(self, tmp_path):
        path = write(tmp_path, "1,0,1\n0,1,0.5\n")
        with pytest.raises(DatasetError, match="row 2"):
            DatasetEnvironment(DatasetSpec(str(path), "positive_vs_negatives", n=2))


def test_make_environment_from_config(tmp_path):
    env = make_environment({"kind": "synthetic", "d": 3, "n": 4, "h_kind": "cosine"}, seed=9)
    assert env.round(1).features.shape == (4, 3)
    path = gen_dataset("classification", 10, tmp_path / "c.csv", d=2, n_classes=2)
    env = make_environment({"kind": "dataset", "path": str(path), "n": 2}, seed=0)
    assert env.round(1).features.shape == (2, 4)
    with pytest.raises(ValueError):
        make_environment({"kind": "bogus"}, seed=0)
