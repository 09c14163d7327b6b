"""Config parsing, CSV export fidelity, and derived metric tables."""

import json

import pytest

from klbudget.experiment_io import (
    ConfigError,
    MetricTable,
    adv_kl_pairs,
    config_to_dict,
    export_run_csv,
    metric_table_to_csv,
    parse_config,
    steps_to_threshold,
)
from klbudget.games import MatrixGameSpec
from klbudget.trainer import RunHistory, differential_config, matrix_config, train


def tiny_history(**overrides):
    cfg = matrix_config(n_agents=3, iterations=5, strategy="waterfill", **overrides)
    return train(cfg)


class FakeRecord:
    def __init__(self, eval_reward):
        self.eval_reward = eval_reward


def fake_history(rewards):
    h = RunHistory(config=matrix_config(iterations=1))
    h.records = [FakeRecord(r) for r in rewards]
    return h


class TestStepsToThreshold:
    def test_reference_scan(self):
        h = fake_history([1.0, 1.2, 1.49, 1.5])
        assert steps_to_threshold(h, 0.99, 1.5) == 3

    def test_never_reached(self):
        h = fake_history([1.0, 1.1])
        assert steps_to_threshold(h, 0.99, 1.5) is None

    def test_zero_fraction_hits_first_record(self):
        h = fake_history([0.0, 1.0])
        assert steps_to_threshold(h, 0.0, 1.5) == 1

    def test_empty_history(self):
        h = fake_history([])
        with pytest.raises(ValueError):
            steps_to_threshold(h, 0.99, 1.5)

    def test_monotone_in_fraction(self):
        h = fake_history([0.5, 0.9, 1.2, 1.4, 1.5])
        steps = [steps_to_threshold(h, f, 1.5) for f in (0.1, 0.5, 0.8, 0.99)]
        assert steps == sorted(steps)

    def test_fraction_validated(self):
        h = fake_history([1.0])
        with pytest.raises(ValueError):
            steps_to_threshold(h, 1.5, 1.5)


class TestExport:
    def test_row_counts(self, tmp_path):
        history = tiny_history()
        export_run_csv(history, tmp_path)
        assert len((tmp_path / "rewards.csv").read_text().splitlines()) == 6
        assert len((tmp_path / "kl.csv").read_text().splitlines()) == 6
        assert len((tmp_path / "policy.csv").read_text().splitlines()) == 6
        cfg = json.loads((tmp_path / "config.json").read_text())
        assert cfg["env"]["kind"] == "matrix"

    def test_reexport_is_byte_identical(self, tmp_path):
        history = tiny_history()
        export_run_csv(history, tmp_path / "a")
        export_run_csv(history, tmp_path / "b")
        for name in ("rewards.csv", "kl.csv", "policy.csv", "config.json"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_round_trip_steps(self, tmp_path):
        history = tiny_history(delta_total=0.4, init_p1=0.3)
        export_run_csv(history, tmp_path)
        in_memory = steps_to_threshold(history, 0.5, 1.5)
        lines = (tmp_path / "rewards.csv").read_text().splitlines()[1:]
        rescanned = None
        for line in lines:
            it, reward, _ = line.split(",")
            if float(reward) >= 0.5 * 1.5:
                rescanned = int(it)
                break
        assert rescanned == in_memory

    def test_config_json_reparses_to_same_config(self, tmp_path):
        for cfg in (
            matrix_config(n_agents=3, iterations=7, strategy="greedy", delta_total=2e-3),
            differential_config(iterations=9, strategy="waterfill", seed=4),
        ):
            text = json.dumps(config_to_dict(cfg))
            assert parse_config(text) == cfg

    def test_kl_columns_per_agent(self, tmp_path):
        history = tiny_history()
        export_run_csv(history, tmp_path)
        header = (tmp_path / "kl.csv").read_text().splitlines()[0].split(",")
        assert header == [
            "iteration",
            "delta_1", "delta_2", "delta_3",
            "realized_kl_1", "realized_kl_2", "realized_kl_3",
            "utility_1", "utility_2", "utility_3",
        ]

    def test_gaussian_policy_columns(self, tmp_path):
        history = train(differential_config(iterations=3))
        export_run_csv(history, tmp_path)
        header = (tmp_path / "policy.csv").read_text().splitlines()[0].split(",")
        assert header == ["iteration", "mu_1", "mu_2"]


class TestAdvKlPairs:
    def test_normalization(self):
        history = tiny_history()
        rec = history.records[0]
        rec.utilities = [0.2, 0.1, 0.0]
        rec.realized_kl = [3e-4, 1e-4, 0.0]
        table = adv_kl_pairs(history)
        first_rows = [r for r in table.rows if r[0] == 1.0]
        assert first_rows[0][2] == pytest.approx(1.0)
        assert first_rows[1][2] == pytest.approx(0.5)
        assert first_rows[0][3] == pytest.approx(3e-4)

    def test_all_zero_utilities_emit_zero(self):
        history = tiny_history()
        for rec in history.records:
            rec.utilities = [0.0, 0.0, 0.0]
        table = adv_kl_pairs(history)
        assert all(r[2] == 0.0 for r in table.rows)

    def test_normalization_bounded(self):
        history = train(matrix_config(n_agents=4, iterations=20, strategy="greedy"))
        table = adv_kl_pairs(history)
        assert all(-1.0 <= r[2] <= 1.0 for r in table.rows)

    def test_table_to_csv(self, tmp_path):
        history = tiny_history()
        path = metric_table_to_csv(adv_kl_pairs(history), tmp_path / "pairs.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "iteration,agent,normalized_utility,realized_kl"
        assert len(lines) == 1 + 5 * 3

    def test_row_width_validated(self):
        with pytest.raises(ValueError):
            MetricTable(kind="x", columns=["a", "b"], rows=[[1.0]])


class TestParseConfig:
    def test_matrix_defaults(self):
        cfg = parse_config("", env="matrix")
        assert isinstance(cfg.env, MatrixGameSpec)
        assert cfg.iterations == 1000
        assert cfg.batch_size == 20
        assert cfg.eval_episodes == 100
        assert cfg.init_p1 == 0.01
        assert cfg.waterfill_tol == 0.01
        assert cfg.greedy_epsilon == 1e-4

    def test_differential_defaults(self):
        cfg = parse_config("", env="differential")
        assert cfg.iterations == 4000
        assert cfg.sigma == 1.15
        assert cfg.init_means == (1.0, 1.0)
        assert cfg.critic_lr == 0.2
        assert cfg.eval_episodes == 1000

    def test_negative_budget_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("alloc.delta_total = -1", env="matrix")

    def test_unknown_key_with_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("env.kind = matrix\nalloc.step = 3\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("train.seed = 1\ntrain.seed = 2\n", env="matrix")

    def test_type_mismatch(self):
        with pytest.raises(ConfigError, match="integer"):
            parse_config("train.iterations = 10.5", env="matrix")

    def test_missing_env(self):
        with pytest.raises(ConfigError, match="env.kind"):
            parse_config("train.seed = 1")

    def test_full_text_config(self):
        text = """
        # comparison run
        env.kind = matrix
        env.n_agents = 6
        env.reward_variant = prefix_ones
        alloc.strategy = waterfill
        alloc.delta_total = 0.002
        train.iterations = 50
        train.seed = 7
        """
        cfg = parse_config(text)
        assert cfg.env.n_agents == 6
        assert cfg.env.reward_variant == "prefix_ones"
        assert cfg.strategy == "waterfill"
        assert cfg.delta_total == 0.002
        assert cfg.iterations == 50
        assert cfg.seed == 7

    def test_json_config(self):
        text = json.dumps(
            {
                "env": {"kind": "differential"},
                "alloc": {"strategy": "greedy", "delta_total": 0.05},
                "train": {"iterations": 12, "init_mean1": 2.0, "init_mean2": 3.0},
            }
        )
        cfg = parse_config(text)
        assert cfg.strategy == "greedy"
        assert cfg.init_means == (2.0, 3.0)
        assert cfg.iterations == 12

    def test_matrix_keys_rejected_for_differential(self):
        with pytest.raises(ConfigError):
            parse_config("env.kind = differential\nenv.n_agents = 4\n")

    def test_init_means_rejected_for_matrix(self):
        with pytest.raises(ConfigError):
            parse_config("env.kind = matrix\ntrain.init_mean1 = 2.0\n")

    def test_bad_strategy_value(self):
        with pytest.raises(ConfigError):
            parse_config("alloc.strategy = simulated_annealing", env="matrix")

    def test_bad_variant(self):
        with pytest.raises(ConfigError):
            parse_config("env.reward_variant = all_or_nothing", env="matrix")

    def test_init_p1_range(self):
        with pytest.raises(ConfigError):
            parse_config("train.init_p1 = 1.5", env="matrix")
