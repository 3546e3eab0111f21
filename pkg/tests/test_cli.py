import json

import pytest

from blo.cli import main
from blo.metrics import TRACE_HEADER


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


QUAD_RUN = {
    "problem": {"family": "quadratic", "n": 4},
    "method": {"name": "bagdc"},
    "schedule": {"alpha": 0.1, "beta": 0.5, "eta": 0.5},
    "stop": {"max_iters": 25},
}


class TestRunCommand:
    def test_success_exit_zero(self, tmp_path):
        cfg = write_config(tmp_path, QUAD_RUN)
        out = tmp_path / "results"
        assert main(["run", cfg, "--out", str(out)]) == 0
        trace = (out / "run-000" / "trace.csv").read_text().splitlines()
        assert trace[0] == TRACE_HEADER

    def test_failed_run_exit_one(self, tmp_path):
        doc = dict(QUAD_RUN, schedule={"alpha": 0.1, "beta": 2.5, "eta": 0.5},
                   stop={"max_iters": 20000})
        cfg = write_config(tmp_path, doc)
        assert main(["run", cfg, "--out", str(tmp_path / "r")]) == 1

    def test_config_error_exit_two(self, tmp_path, capsys):
        doc = {"problem": {"family": "quadratic"}, "method": {"name": "bgdc"}}
        cfg = write_config(tmp_path, doc)
        assert main(["run", cfg, "--out", str(tmp_path / "r")]) == 2
        err = capsys.readouterr().err
        assert "config error:" in err
        assert "runs[0].method.name: unknown method 'bgdc'" in err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "none.json")]) == 2
        assert "cannot read config" in capsys.readouterr().err

    def test_parallel_flag(self, tmp_path):
        doc = {"runs": [dict(QUAD_RUN, name="a"), dict(QUAD_RUN, name="b")]}
        cfg = write_config(tmp_path, doc)
        out = tmp_path / "results"
        assert main(["run", cfg, "--parallel", "2", "--out", str(out)]) == 0
        assert (out / "a" / "summary.json").exists()
        assert (out / "b" / "summary.json").exists()

    def test_seed_env_override(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path, QUAD_RUN)
        out = tmp_path / "results"
        monkeypatch.setenv("BLO_SEED", "9")
        assert main(["run", cfg, "--out", str(out)]) == 0
        payload = json.loads((out / "run-000" / "summary.json").read_text())
        assert payload["config"]["seed"] == 9
        assert payload["config"]["problem"]["seed"] == 9

    def test_bad_seed_env(self, tmp_path, monkeypatch, capsys):
        cfg = write_config(tmp_path, QUAD_RUN)
        monkeypatch.setenv("BLO_SEED", "many")
        assert main(["run", cfg, "--out", str(tmp_path / "r")]) == 2
        assert "BLO_SEED must be an integer" in capsys.readouterr().err


class TestCheckCommand:
    def test_reports_each_problem_once(self, tmp_path, capsys):
        doc = {"runs": [dict(QUAD_RUN, name="a"), dict(QUAD_RUN, name="b"),
                        {"problem": {"family": "multimin"},
                         "method": {"name": "bda"}}]}
        cfg = write_config(tmp_path, doc)
        assert main(["check", cfg]) == 0
        out = capsys.readouterr().out.splitlines()
        # two distinct problems, the duplicate quadratic is skipped
        assert len(out) == 2
        assert out[0].startswith("ok   a: max relative error ")
        assert out[1].startswith("ok   multimin: max relative error ")

    def test_hypercleaning_check(self, tmp_path, capsys):
        doc = {"problem": {"family": "hypercleaning", "classes": 3, "dim": 4,
                           "n_train": 21, "n_val": 9},
               "method": {"name": "bagdc"}}
        cfg = write_config(tmp_path, doc)
        assert main(["check", cfg]) == 0
        assert "ok   hypercleaning" in capsys.readouterr().out


class TestReproduceCommand:
    def test_study_smoke(self, tmp_path):
        out = tmp_path / "study"
        assert main(["reproduce", "counterexample", "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["ok"] is True
        assert summary["seed"] == 0

    def test_seed_flag_recorded(self, tmp_path):
        out = tmp_path / "study"
        assert main(["reproduce", "counterexample", "--seed", "3",
                     "--out", str(out)]) == 0
        assert json.loads((out / "summary.json").read_text())["seed"] == 3

    def test_unknown_study_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            main(["reproduce", "warmup"])

    def test_idx_flags_rejected_outside_hypercleaning(self, tmp_path, capsys):
        rc = main(["reproduce", "counterexample", "--out", str(tmp_path / "s"),
                   "--idx-train", "x"])
        assert rc == 2
        assert "only apply" in capsys.readouterr().err
