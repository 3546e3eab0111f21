import json

import pytest

from blo.config import (ExperimentConfig, ProblemSpec, config_to_dict,
                        parse_config)
from blo.errors import ConfigError

MINIMAL = json.dumps({
    "problem": {"family": "quadratic", "n": 10},
    "method": {"name": "bagdc"},
})


class TestParsing:
    def test_minimal_run_gets_defaults(self):
        (cfg,) = parse_config(MINIMAL)
        assert cfg.problem.family == "quadratic"
        assert cfg.problem.n == 10
        assert cfg.method.name == "bagdc"
        assert cfg.schedule.mode == "strongly-convex"
        assert cfg.schedule.alpha is None
        assert cfg.stop.max_iters == 1000
        assert cfg.stop.d_norm_tol == 1e-6
        assert cfg.stop.max_seconds is None
        assert cfg.seed == 0
        assert cfg.trace_every == 1
        assert cfg.name is None

    def test_runs_wrapper(self):
        doc = json.dumps({"runs": [json.loads(MINIMAL), json.loads(MINIMAL)]})
        assert len(parse_config(doc)) == 2

    def test_bare_list(self):
        doc = json.dumps([json.loads(MINIMAL)])
        assert len(parse_config(doc)) == 1

    def test_unknown_top_level_key(self):
        doc = json.dumps({"runs": [json.loads(MINIMAL)], "note": "hi"})
        with pytest.raises(ConfigError, match="note: unknown top-level key"):
            parse_config(doc)

    def test_invalid_json(self):
        with pytest.raises(ConfigError, match="invalid JSON"):
            parse_config("{not json")

    def test_non_object_run(self):
        with pytest.raises(ConfigError, match=r"runs\[0\]: expected an object"):
            parse_config("[3]")

    def test_scalar_document(self):
        with pytest.raises(ConfigError, match="expected an object or a list"):
            parse_config("3")

    def test_empty_runs(self):
        with pytest.raises(ConfigError, match="no runs"):
            parse_config('{"runs": []}')

    def test_full_run_round_trips(self):
        doc = {
            "name": "demo",
            "problem": {"family": "quadratic", "n": 4, "spectrum": [0.5, 5],
                        "z0": [1.0, 2.0, 3.0, 4.0], "seed": 3},
            "method": {"name": "rhg", "T": 7},
            "schedule": {"mode": "merely-convex", "alpha": 0.2, "beta": 0.5,
                         "eta": 0.5, "mu_bar": 0.4, "p": 0.05},
            "stop": {"max_iters": 50, "kkt_tol": 1e-9},
            "seed": 2,
            "trace_every": 5,
        }
        (cfg,) = parse_config(json.dumps(doc))
        assert cfg.problem.spectrum == (0.5, 5.0)
        assert cfg.problem.z0 == (1.0, 2.0, 3.0, 4.0)
        assert cfg.method.T == 7
        assert cfg.schedule.mu_bar == 0.4
        assert cfg.stop.kkt_tol == 1e-9
        (cfg2,) = parse_config(json.dumps(config_to_dict(cfg)))
        assert cfg2 == cfg

    def test_echo_drops_unset_fields(self):
        (cfg,) = parse_config(MINIMAL)
        echo = config_to_dict(cfg)
        assert "idx_train" not in echo["problem"]
        assert "max_seconds" not in echo["stop"]
        assert "name" not in echo


class TestValidationErrors:
    def test_missing_family(self):
        doc = json.dumps({"problem": {"n": 3}, "method": {"name": "bagdc"}})
        with pytest.raises(ConfigError, match=r"runs\[0\].problem.family: required"):
            parse_config(doc)

    def test_unknown_family(self):
        doc = json.dumps({"problem": {"family": "cubic"},
                          "method": {"name": "bagdc"}})
        with pytest.raises(ConfigError, match="unknown problem family 'cubic'"):
            parse_config(doc)

    def test_unknown_method_name(self):
        doc = json.dumps({"problem": {"family": "quadratic"},
                          "method": {"name": "bgdc"}})
        with pytest.raises(ConfigError,
                           match=r"runs\[0\].method.name: unknown method 'bgdc' "
                                 r"\(expected one of"):
            parse_config(doc)

    def test_missing_method(self):
        doc = json.dumps({"problem": {"family": "quadratic"}})
        with pytest.raises(ConfigError, match=r"runs\[0\].method: required"):
            parse_config(doc)

    def test_unknown_key_lists_alternatives(self):
        doc = json.dumps({"problem": {"family": "quadratic", "size": 5},
                          "method": {"name": "bagdc"}})
        with pytest.raises(ConfigError,
                           match=r"runs\[0\].problem.size: unknown key \(allowed:"):
            parse_config(doc)

    def test_bool_is_not_a_number(self):
        doc = json.dumps({"problem": {"family": "quadratic"},
                          "method": {"name": "bagdc"},
                          "schedule": {"alpha": True}})
        with pytest.raises(ConfigError, match=r"schedule.alpha: expected a number, got bool"):
            parse_config(doc)

    def test_float_is_not_an_integer(self):
        doc = json.dumps({"problem": {"family": "quadratic", "n": 10.5},
                          "method": {"name": "bagdc"}})
        with pytest.raises(ConfigError, match=r"problem.n: expected an integer, got float"):
            parse_config(doc)

    def test_schedule_constraint_carries_path(self):
        doc = json.dumps({"problem": {"family": "quadratic"},
                          "method": {"name": "bagdc"},
                          "schedule": {"alpha": -1.0}})
        with pytest.raises(ConfigError,
                           match=r"runs\[0\].schedule: alpha must be positive"):
            parse_config(doc)

    def test_empty_stop_rejected(self):
        doc = json.dumps({"problem": {"family": "quadratic"},
                          "method": {"name": "bagdc"}, "stop": {}})
        with pytest.raises(ConfigError,
                           match=r"runs\[0\].stop: at least one stop criterion"):
            parse_config(doc)

    def test_trace_every_bound(self):
        doc = json.dumps({"problem": {"family": "quadratic"},
                          "method": {"name": "bagdc"}, "trace_every": 0})
        with pytest.raises(ConfigError, match=r"trace_every: must be >= 1"):
            parse_config(doc)

    def test_bad_spectrum(self):
        base = {"problem": {"family": "quadratic", "spectrum": "flat"},
                "method": {"name": "bagdc"}}
        with pytest.raises(ConfigError, match=r"problem.spectrum"):
            parse_config(json.dumps(base))
        base["problem"]["spectrum"] = [1.0, 2.0, 3.0]
        with pytest.raises(ConfigError, match=r"problem.spectrum"):
            parse_config(json.dumps(base))

    def test_bad_z0(self):
        doc = json.dumps({"problem": {"family": "quadratic", "z0": "mean"},
                          "method": {"name": "bagdc"}})
        with pytest.raises(ConfigError, match=r"problem.z0"):
            parse_config(doc)


class TestSweeps:
    def test_eta_sweep_expands(self):
        doc = json.dumps({"problem": {"family": "quadratic", "n": 10},
                          "method": {"name": "bagdc"},
                          "schedule": {"alpha": 0.1, "beta": 0.5,
                                       "eta": [0.01, 0.1, 1.0]}})
        cfgs = parse_config(doc)
        assert [c.schedule.eta for c in cfgs] == [0.01, 0.1, 1.0]
        assert all(c.schedule.alpha == 0.1 for c in cfgs)

    def test_cross_product(self):
        doc = json.dumps({"problem": {"family": "quadratic"},
                          "method": {"name": "bagdc"},
                          "schedule": {"eta": [0.1, 1.0]},
                          "seed": [0, 1]})
        cfgs = parse_config(doc)
        assert len(cfgs) == 4
        assert {(c.schedule.eta, c.seed) for c in cfgs} == {
            (0.1, 0), (0.1, 1), (1.0, 0), (1.0, 1)}

    def test_named_sweep_gets_suffixes(self):
        doc = json.dumps({"name": "tune", "problem": {"family": "quadratic"},
                          "method": {"name": "bagdc"},
                          "schedule": {"eta": [0.1, 1.0]}})
        cfgs = parse_config(doc)
        assert [c.name for c in cfgs] == ["tune-0", "tune-1"]

    def test_structural_lists_are_not_sweeps(self):
        doc = json.dumps({"problem": {"family": "quadratic", "n": 2,
                                      "spectrum": [0.5, 5.0], "z0": [1.0, 2.0]},
                          "method": {"name": "bagdc"}})
        cfgs = parse_config(doc)
        assert len(cfgs) == 1
        assert cfgs[0].problem.spectrum == (0.5, 5.0)

    def test_method_parameter_sweep(self):
        doc = json.dumps({"problem": {"family": "quadratic"},
                          "method": {"name": "rhg", "T": [1, 10, 100]}})
        assert [c.method.T for c in parse_config(doc)] == [1, 10, 100]

    def test_empty_sweep_list_rejected(self):
        doc = json.dumps({"problem": {"family": "quadratic"},
                          "method": {"name": "bagdc"},
                          "schedule": {"eta": []}})
        with pytest.raises(ConfigError, match="sweep list must be non-empty"):
            parse_config(doc)

    def test_multi_run_document_with_sweep(self):
        runs = [{"problem": {"family": "quadratic"},
                 "method": {"name": "bagdc"},
                 "schedule": {"eta": [0.1, 1.0]}},
                {"problem": {"family": "multimin"},
                 "method": {"name": "bda"}}]
        cfgs = parse_config(json.dumps({"runs": runs}))
        assert len(cfgs) == 3
        assert cfgs[2].problem.family == "multimin"


class TestProblemSpecFields:
    def test_hypercleaning_fields(self):
        doc = json.dumps({"problem": {"family": "hypercleaning", "classes": 3,
                                      "dim": 4, "n_train": 30, "n_val": 12,
                                      "rho": 0.2, "separation": 2.5,
                                      "reg_c": 1e-2},
                          "method": {"name": "bagdc"}})
        (cfg,) = parse_config(doc)
        assert cfg.problem.classes == 3
        assert cfg.problem.rho == 0.2
        assert cfg.problem.reg_c == 1e-2

    def test_idx_paths(self):
        doc = json.dumps({"problem": {"family": "hypercleaning",
                                      "idx_train": "a", "idx_train_labels": "b",
                                      "idx_val": "c", "idx_val_labels": "d"},
                          "method": {"name": "bagdc"}})
        (cfg,) = parse_config(doc)
        assert cfg.problem.idx_train == "a"
        assert cfg.problem.idx_val_labels == "d"

    def test_spec_is_frozen(self):
        spec = ProblemSpec(family="quadratic")
        with pytest.raises(Exception):
            spec.n = 5

    def test_experiment_config_is_frozen(self):
        (cfg,) = parse_config(MINIMAL)
        assert isinstance(cfg, ExperimentConfig)
        with pytest.raises(Exception):
            cfg.seed = 5
