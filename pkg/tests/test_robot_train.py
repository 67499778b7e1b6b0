import numpy as np
import pytest

from circuflow.robot.cem import TrainerConfig, desk_scale_setup, train_cem
from circuflow.robot.policies import MLPPolicy, ZeroPolicy, load_policy, save_policy
from circuflow.robot.reach_env import EpisodeCriterion, ReachEnv


def tiny_trainer(**overrides) -> TrainerConfig:
    base = dict(
        generations=3,
        population=8,
        episodes_per_candidate=2,
        shortlist=2,
        holdout_episodes=4,
        hidden=(4,),
    )
    base.update(overrides)
    return TrainerConfig(**base)


class TestTrainCEM:
    def test_zero_generations_returns_initialized_policy(self):
        env = ReachEnv()
        policy, log = train_cem(env, tiny_trainer(generations=0), seed=3)
        assert log == []
        assert np.all(policy.flat == 0.0)
        # All-zero parameters command exactly zero torque.
        assert policy.act([0.5] * 11) == (0.0, 0.0)

    def test_deterministic_given_seed(self):
        env = ReachEnv(shaping_bonus=1.0)
        a, log_a = train_cem(env, tiny_trainer(), seed=11)
        b, log_b = train_cem(env, tiny_trainer(), seed=11)
        assert np.array_equal(a.flat, b.flat)
        assert log_a == log_b

    def test_different_seeds_differ(self):
        env = ReachEnv(shaping_bonus=1.0)
        a, _ = train_cem(env, tiny_trainer(), seed=1)
        b, _ = train_cem(env, tiny_trainer(), seed=2)
        assert not np.array_equal(a.flat, b.flat)

    def test_log_structure(self):
        env = ReachEnv(shaping_bonus=1.0)
        _, log = train_cem(env, tiny_trainer(), seed=0)
        assert [row.generation for row in log] == [0, 1, 2]
        for row in log:
            assert row.elite_mean >= row.mean_return
            assert np.isfinite(row.best_return)

    def test_best_return_is_running_max(self):
        env = ReachEnv(shaping_bonus=1.0)
        _, log = train_cem(env, tiny_trainer(generations=5), seed=0)
        bests = [row.best_return for row in log]
        assert bests == sorted(bests)

    @pytest.mark.parametrize("kwargs", [
        {"population": 1}, {"elite_fraction": 0.0}, {"episodes_per_candidate": 0},
        {"shortlist": 0},
    ])
    def test_bad_config_rejected(self, kwargs):
        with pytest.raises(ValueError):
            tiny_trainer(**kwargs)


class TestDeskScaleSetup:
    def test_training_env_is_shaped_eval_env_is_plain(self):
        train_env, eval_env, trainer = desk_scale_setup()
        assert train_env.shaping_bonus > 0.0
        assert eval_env.shaping_bonus == 0.0 and eval_env.success_bonus == 0.0
        assert train_env.criterion == eval_env.criterion
        assert trainer.generations > 0

    def test_custom_criterion_propagates(self):
        criterion = EpisodeCriterion(max_steps=20)
        train_env, eval_env, _ = desk_scale_setup(criterion)
        assert train_env.criterion.max_steps == 20
        assert eval_env.criterion.max_steps == 20


class TestPolicyFiles:
    def test_mlp_round_trip(self, tmp_path):
        policy = MLPPolicy(hidden=(4,), torque_limit=0.07)
        rng = np.random.default_rng(5)
        policy.set_flat(rng.normal(size=policy.n_params))
        path = tmp_path / "policy.json"
        save_policy(policy, path)
        again = load_policy(path)
        obs = list(rng.normal(size=11))
        assert again.act(obs) == policy.act(obs)
        assert again.hidden == (4,)
        assert again.torque_limit == 0.07

    def test_zero_round_trip(self, tmp_path):
        path = tmp_path / "zero.json"
        save_policy(ZeroPolicy(), path)
        assert load_policy(path).act([0.0] * 11) == (0.0, 0.0)

    def test_unknown_format_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "other/9", "type": "mlp"}')
        with pytest.raises(ValueError):
            load_policy(path)

    def test_wrong_parameter_count_rejected(self):
        policy = MLPPolicy(hidden=(4,))
        with pytest.raises(ValueError):
            policy.set_flat(np.zeros(3))
