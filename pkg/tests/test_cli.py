import json

from click.testing import CliRunner

from xairec.cli import main
from tests.test_pipeline import _tiny_csv


def _write_config(tmp_path, payload):
    p = tmp_path / "config.json"
    p.write_text(json.dumps(payload))
    return str(p)


def _proto_payload(csv_path, epochs=0):
    return {
        "dataset": {"kind": "csv", "path": csv_path,
                    "target_column": "target", "task": "regression"},
        "context": {"explanandum": "what-data-lead", "explanan": "data-point"},
        "run": {"epochs": epochs, "seed": 0},
    }


class TestRunCommand:
    def test_successful_run(self, tmp_path):
        cfg = _write_config(tmp_path, _proto_payload(_tiny_csv(tmp_path)))
        result = CliRunner().invoke(
            main, ["run", "--config", cfg, "--out", str(tmp_path / "out")]
        )
        assert result.exit_code == 0, result.output
        assert "ranking.csv" in result.output
        assert (tmp_path / "out/ranking.csv").exists()

    def test_missing_config_exits_2(self):
        result = CliRunner().invoke(main, ["run", "--config", "/nope.json"])
        assert result.exit_code == 2
        assert "not found" in result.output

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = _write_config(tmp_path, {"dataset": {}, "context": {}, "oops": 1})
        result = CliRunner().invoke(main, ["run", "--config", cfg])
        assert result.exit_code == 2

    def test_empty_shortlist_exits_3(self, tmp_path):
        payload = _proto_payload(_tiny_csv(tmp_path))
        payload["context"] = {"explanandum": "why-this-prediction",
                              "explanan": "data-point"}
        cfg = _write_config(tmp_path, payload)
        result = CliRunner().invoke(
            main, ["run", "--config", cfg, "--out", str(tmp_path / "out")]
        )
        assert result.exit_code == 3
        assert "pairings" in result.output

    def test_missing_data_file_exits_4(self, tmp_path):
        payload = _proto_payload(str(tmp_path / "gone.csv"))
        cfg = _write_config(tmp_path, payload)
        result = CliRunner().invoke(
            main, ["run", "--config", cfg, "--out", str(tmp_path / "out")]
        )
        assert result.exit_code == 4

    def test_seed_override_changes_nothing_when_equal(self, tmp_path):
        cfg = _write_config(tmp_path, _proto_payload(_tiny_csv(tmp_path)))
        r1 = CliRunner().invoke(
            main, ["run", "--config", cfg, "--seed", "0",
                   "--out", str(tmp_path / "a")]
        )
        r2 = CliRunner().invoke(
            main, ["run", "--config", cfg, "--out", str(tmp_path / "b")]
        )
        assert r1.exit_code == r2.exit_code == 0
        assert (tmp_path / "a/ranking.csv").read_bytes() == \
            (tmp_path / "b/ranking.csv").read_bytes()


class TestListSolutions:
    def test_lists_everything(self):
        result = CliRunner().invoke(main, ["list-solutions"])
        assert result.exit_code == 0
        for sid in ("lime", "kernel_shap", "kmedoids", "mmd_critic", "protodash"):
            assert sid in result.output
        assert "robustness" in result.output


class TestExplainCommand:
    def test_prototype_explanation(self, tmp_path):
        cfg = _write_config(tmp_path, _proto_payload(_tiny_csv(tmp_path)))
        out = tmp_path / "e.jsonl"
        result = CliRunner().invoke(
            main, ["explain", "--config", cfg, "--solution", "kmedoids",
                   "--hp", "k=3,init=build", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert "prototype 0" in result.output
        assert len(out.read_text().splitlines()) == 3

    def test_unknown_solution_exits_2(self, tmp_path):
        cfg = _write_config(tmp_path, _proto_payload(_tiny_csv(tmp_path)))
        result = CliRunner().invoke(
            main, ["explain", "--config", cfg, "--solution", "nope"]
        )
        assert result.exit_code == 2

    def test_out_of_domain_hp_exits_2(self, tmp_path):
        cfg = _write_config(tmp_path, _proto_payload(_tiny_csv(tmp_path)))
        result = CliRunner().invoke(
            main, ["explain", "--config", cfg, "--solution", "kmedoids",
                   "--hp", "k=4000"]
        )
        assert result.exit_code == 2

    def test_malformed_hp_exits_2(self, tmp_path):
        cfg = _write_config(tmp_path, _proto_payload(_tiny_csv(tmp_path)))
        result = CliRunner().invoke(
            main, ["explain", "--config", cfg, "--solution", "kmedoids",
                   "--hp", "k3"]
        )
        assert result.exit_code == 2


class TestWizard:
    def test_builds_valid_config(self, tmp_path):
        out = tmp_path / "w.json"
        answers = "\n".join([
            "0",            # question
            "0",            # explanation form (feature-summary)
            "1", "2", "0.5",  # metric weights
            "csv",
            "data.csv",
            "regression",
            "target",
            "10",           # epochs
            "0",            # seed
        ]) + "\n"
        result = CliRunner().invoke(
            main, ["wizard", "--out", str(out)], input=answers
        )
        assert result.exit_code == 0, result.output
        cfg = json.loads(out.read_text())
        assert cfg["context"]["explanan"] == "feature-summary"
        assert cfg["context"]["weights"]["infidelity"] == 2.0
        assert cfg["run"]["epochs"] == 10

    def test_abort_leaves_no_file(self, tmp_path):
        out = tmp_path / "w.json"
        result = CliRunner().invoke(main, ["wizard", "--out", str(out)], input="")
        assert result.exit_code == 2
        assert not out.exists()


class TestBenchStrategies:
    def test_grid_runs_and_reports(self, tmp_path):
        cfg = _write_config(tmp_path, _proto_payload(_tiny_csv(tmp_path)))
        out = tmp_path / "bench"
        result = CliRunner().invoke(
            main, ["bench-strategies", "--config", cfg, "--out", str(out),
                   "--epochs", "0"]
        )
        assert result.exit_code == 0, result.output
        rows = json.loads((out / "bench_strategies.json").read_text())
        assert {r["variant"] for r in rows} >= {"no_strategies", "all_strategies"}
        assert all(r["seconds"] > 0 for r in rows)
