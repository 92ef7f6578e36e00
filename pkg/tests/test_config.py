import pytest

from gblab.config import ConfigError, load_config, override_config, parse_config

MINIMAL = """\
[experiment]
horizon = 40
reps = 3
base_seed = 11

[instance]
actions = gaussian
d1 = 3
d2 = 3
rank = 1
n_actions = 12

[graph]
model = er
p = 0.5

[family]
name = linear
omega = 0.01

[policy:glm_ucb]
ucb_scale = 0.1
"""


class TestParse:
    def test_minimal_round_trip(self):
        cfg = parse_config(MINIMAL)
        assert cfg.horizon == 40 and cfg.reps == 3 and cfg.base_seed == 11
        assert cfg.out_dir == "results"
        assert cfg.hit_percent == 5.0 and cfg.workers == 1
        assert cfg.action_kind == "gaussian" and cfg.n_actions == 12
        assert cfg.graph_model == "er" and cfg.graph_p == 0.5
        assert cfg.family_name == "linear" and cfg.omega == 0.01
        assert len(cfg.policies) == 1
        setting = cfg.policies[0]
        assert setting.kind == "glm_ucb"
        assert setting.config.name == "glm_ucb"
        assert setting.config.horizon == 40
        assert setting.config.ucb_scale == 0.1
        assert setting.config.rank == 1
        assert setting.config.t1 is None

    def test_policy_kind_and_auto_values(self):
        text = MINIMAL + """
[policy:tuned]
kind = two_stage_graph
t1 = 10
lam = 0.05
alpha = 0.2
lambda_perp = auto
tau = 0.3
moment_scale = 0.7
"""
        cfg = parse_config(text)
        tuned = cfg.policies[1]
        assert tuned.kind == "two_stage_graph"
        assert tuned.config.name == "tuned"
        assert tuned.config.t1 == 10
        assert tuned.config.lambda_perp is None
        assert tuned.config.tau == 0.3
        assert tuned.config.moment_scale == 0.7

    def test_inline_comments(self):
        cfg = parse_config(MINIMAL.replace("p = 0.5", "p = 0.5  # dense"))
        assert cfg.graph_p == 0.5

    def test_outer_actions(self):
        text = MINIMAL.replace(
            "actions = gaussian\nd1 = 3\nd2 = 3\nrank = 1\nn_actions = 12",
            "actions = outer\nd1 = 3\nd2 = 3\nrank = 1\nn1 = 4\nn2 = 5",
        )
        cfg = parse_config(text)
        assert cfg.action_kind == "outer"
        assert (cfg.n1, cfg.n2, cfg.n_actions) == (4, 5, 20)

    def test_ingest_without_graph_section(self):
        text = """\
[experiment]
horizon = 20
reps = 1
base_seed = 0

[instance]
actions = ingest
rank = 1
matrix = ratings.csv

[family]
name = logistic

[policy:glm_ucb]
"""
        cfg = parse_config(text)
        assert cfg.action_kind == "ingest"
        assert cfg.matrix_path == "ratings.csv"
        assert cfg.graph_model == "knn"
        assert cfg.omega is None


class TestErrors:
    def errs(self, text, match):
        with pytest.raises(ConfigError, match=match):
            parse_config(text)

    def test_unknown_key_named(self):
        self.errs(MINIMAL.replace("p = 0.5", "p = 0.5\nfoo = 1"),
                  "'foo'.*\\[graph\\]")

    def test_unknown_section(self):
        self.errs(MINIMAL + "\n[mystery]\nx = 1\n", "unknown config section")

    def test_missing_required_key(self):
        self.errs(MINIMAL.replace("horizon = 40\n", ""),
                  "'horizon'.*\\[experiment\\]")

    def test_bad_type_named(self):
        self.errs(MINIMAL.replace("reps = 3", "reps = many"),
                  "'reps'.*integer")

    def test_unknown_policy_kind(self):
        self.errs(MINIMAL + "\n[policy:zap]\nkind = zap\n",
                  "must be one of")

    def test_duplicate_policy_label(self):
        dup = MINIMAL + "\n[policy:glm_ucb ]\nucb_scale = 1\n"
        self.errs(dup, "duplicate")

    def test_no_policy_sections(self):
        self.errs(MINIMAL[: MINIMAL.index("[policy")], "no \\[policy")

    def test_rank_exceeds_dims(self):
        self.errs(MINIMAL.replace("rank = 1", "rank = 4"), "'rank'")

    def test_er_needs_p(self):
        self.errs(MINIMAL.replace("p = 0.5", ""), "'p'")

    def test_p_out_of_range(self):
        self.errs(MINIMAL.replace("p = 0.5", "p = 1.5"), "\\(0, 1\\]")

    def test_policy_value_error_names_section(self):
        self.errs(MINIMAL + "\n[policy:bad]\nkind = glm_ucb\nlam = 7\n",
                  "\\[policy:bad\\]")

    def test_ingest_rejects_non_knn_graph(self):
        text = """\
[experiment]
horizon = 20
reps = 1
base_seed = 0

[instance]
actions = ingest
rank = 1
matrix = m.csv

[graph]
model = er
p = 0.5

[family]
name = linear

[policy:glm_ucb]
"""
        self.errs(text, "k-NN")

    def test_syntax_error_reports_origin(self):
        with pytest.raises(ConfigError, match="parse"):
            parse_config("not an ini file at all\n")


class TestLoadAndOverride:
    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/nonexistent/path.ini")

    def test_load_from_disk(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text(MINIMAL)
        cfg = load_config(str(path))
        assert cfg.horizon == 40

    def test_overrides(self):
        cfg = parse_config(MINIMAL)
        out = override_config(cfg, seed=99, reps=7, out_dir="elsewhere")
        assert out.base_seed == 99 and out.reps == 7
        assert out.out_dir == "elsewhere"
        assert cfg.base_seed == 11

    def test_override_validation(self):
        cfg = parse_config(MINIMAL)
        with pytest.raises(ConfigError):
            override_config(cfg, seed=-1)
        with pytest.raises(ConfigError):
            override_config(cfg, reps=0)
