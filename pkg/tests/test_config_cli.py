import json

import numpy as np
import pytest

from actorsteg.cli import main
from actorsteg.config import ConfigError, ExperimentConfig
from actorsteg.verdict import evaluate, load_verdict_csv


class TestConfig:
    def test_default_valid(self):
        cfg = ExperimentConfig.default()
        assert cfg.n_systems == 3
        assert cfg.threshold == 0.7

    def test_json_round_trip(self):
        cfg = ExperimentConfig.default()
        again = ExperimentConfig.from_dict(json.loads(cfg.to_json()))
        assert again == cfg

    def test_schema_rejects_unknown_system(self):
        doc = ExperimentConfig.default().to_dict()
        doc["systems"] = ["jpeg_f5"]
        with pytest.raises(ConfigError, match="schema"):
            ExperimentConfig.from_dict(doc)

    def test_schema_rejects_negative_sigma(self):
        doc = ExperimentConfig.default().to_dict()
        doc["train_source"]["base_noise_sigma"] = -2.0
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(doc)

    def test_schema_rejects_extra_keys(self):
        doc = ExperimentConfig.default().to_dict()
        doc["surprise"] = 1
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(doc)

    def test_duplicate_source_ids_rejected(self):
        doc = ExperimentConfig.default().to_dict()
        doc["csm_sources"][0]["source_id"] = "S0"
        with pytest.raises(ConfigError, match="distinct"):
            ExperimentConfig.from_dict(doc)

    def test_identical_source_parameters_rejected(self):
        doc = ExperimentConfig.default().to_dict()
        src = dict(doc["train_source"])
        src["source_id"] = "clone"
        doc["csm_sources"] = [src]
        with pytest.raises(ConfigError, match="differ"):
            ExperimentConfig.from_dict(doc)

    def test_threshold_range(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.default().with_overrides(threshold=1.5)

    def test_scale_shrinks_counts(self):
        cfg = ExperimentConfig.default().with_overrides(scale=0.1)
        assert cfg.n_train_actors_scaled == 100
        assert cfg.n_test_actors_scaled == 40

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            ExperimentConfig.from_json_file(tmp_path / "none.json")


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory, micro_config):
    """One gen+train+eval round through the CLI, shared by the tests below."""
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "config.json"
    cfg_path.write_text(micro_config.to_json())
    assert main(["gen", "--config", str(cfg_path), "--out", str(root / "dataset")]) == 0
    assert (
        main(
            [
                "train",
                "--config",
                str(cfg_path),
                "--dataset",
                str(root / "dataset"),
                "--out",
                str(root / "models"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "eval",
                "--config",
                str(cfg_path),
                "--dataset",
                str(root / "dataset"),
                "--models",
                str(root / "models"),
                "--out",
                str(root / "eval"),
            ]
        )
        == 0
    )
    return micro_config, root, cfg_path


class TestCliGen:
    def test_manifest_line_counts(self, cli_workspace):
        cfg, root, _ = cli_workspace
        lines = (root / "dataset" / "train.jsonl").read_text().strip().splitlines()
        assert len(lines) == cfg.n_train_actors_scaled

    def test_sweep_points_produce_manifests(self, cli_workspace):
        cfg, root, _ = cli_workspace
        for pct in cfg.csm_sweep:
            assert (root / "dataset" / f"test_csm{pct:03d}.jsonl").exists()
        assert len(list((root / "dataset").glob("test_csm*.jsonl"))) == len(cfg.csm_sweep)

    def test_regen_byte_identical(self, cli_workspace, tmp_path):
        cfg, root, cfg_path = cli_workspace
        assert main(["gen", "--config", str(cfg_path), "--out", str(tmp_path / "d2")]) == 0
        a = (root / "dataset" / "train.jsonl").read_bytes()
        b = (tmp_path / "d2" / "train.jsonl").read_bytes()
        assert a == b


class TestCliTrain:
    def test_model_file_count(self, cli_workspace):
        cfg, root, _ = cli_workspace
        files = sorted(p.name for p in (root / "models").glob("*.json"))
        # 2N image models + final + baseline + manifest
        assert len([f for f in files if f.startswith("image_")]) == 2 * cfg.n_systems
        assert "actor_final.json" in files
        assert "actor_baseline.json" in files
        assert "manifest.json" in files

    def test_retrain_byte_identical(self, cli_workspace, tmp_path):
        cfg, root, cfg_path = cli_workspace
        assert (
            main(
                [
                    "train",
                    "--config",
                    str(cfg_path),
                    "--dataset",
                    str(root / "dataset"),
                    "--out",
                    str(tmp_path / "m2"),
                ]
            )
            == 0
        )
        for name in ["actor_final.json", "actor_baseline.json"] + [
            f"image_{ab}_{s}.json" for ab in "ab" for s in cfg.systems
        ]:
            assert (root / "models" / name).read_bytes() == (tmp_path / "m2" / name).read_bytes()

    def test_missing_dataset_reports_path(self, cli_workspace, tmp_path, capsys):
        _, _, cfg_path = cli_workspace
        missing = tmp_path / "not_a_dataset"
        rc = main(
            [
                "train",
                "--config",
                str(cfg_path),
                "--dataset",
                str(missing),
                "--out",
                str(tmp_path / "m3"),
            ]
        )
        assert rc != 0
        err = json.loads(capsys.readouterr().err.strip())
        assert "not_a_dataset" in err["error"]["message"]


class TestCliEval:
    def test_report_row_per_sweep_point(self, cli_workspace):
        cfg, root, _ = cli_workspace
        report = json.loads((root / "eval" / "report.json").read_text())
        assert [r["csm_percent"] for r in report["rows"]] == sorted(cfg.csm_sweep)
        csv_lines = (root / "eval" / "report.csv").read_text().strip().splitlines()
        assert csv_lines[0] == "csm_percent,baseline_accuracy,proposed_accuracy,nc_fraction"
        assert len(csv_lines) == 1 + len(cfg.csm_sweep)

    def test_summary_reproducible_from_verdict_csv(self, cli_workspace):
        cfg, root, _ = cli_workspace
        for pct in cfg.csm_sweep:
            summary = json.loads(
                (root / "eval" / f"summary_csm{pct:03d}.json").read_text()
            )
            pairs = load_verdict_csv(root / "eval" / f"verdicts_proposed_csm{pct:03d}.csv")
            again = evaluate(pairs)
            assert again.to_dict() == summary["proposed"]

    def test_per_actor_csv_columns(self, cli_workspace):
        cfg, root, _ = cli_workspace
        head = (
            (root / "eval" / "verdicts_proposed_csm000.csv").read_text().splitlines()[0]
        )
        assert head == "actor_id,ground_truth,decision,predicted_class,selected_acc"


class TestCliErrorsAndAudit:
    def test_invalid_config_machine_readable_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"width": "huge"}')
        rc = main(["gen", "--config", str(bad), "--out", str(tmp_path / "d")])
        assert rc != 0
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"]["type"] == "ConfigError"

    def test_bad_csm_list(self, tmp_path, capsys):
        rc = main(["gen", "--csm", "0,banana", "--out", str(tmp_path / "d")])
        assert rc != 0
        err = json.loads(capsys.readouterr().err.strip())
        assert "csm" in err["error"]["message"]

    def test_audit_directionality_stdout(self, micro_config, tmp_path, capsys):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(micro_config.to_json())
        rc = main(
            [
                "audit-directionality",
                "--config",
                str(cfg_path),
                "--covers",
                "30",
                "--system",
                "lsb_matching",
                "--payload",
                "0.4",
            ]
        )
        assert rc == 0
        doc = json.loads(capsys.readouterr().out.strip())
        assert doc["n_covers"] == 30
        assert 0.0 <= doc["overall_fraction"] <= 1.0
        assert len(doc["per_feature_fraction"]) == micro_config.features.dim

    def test_seed_override_changes_dataset(self, micro_config, tmp_path):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(micro_config.to_json())
        assert main(["gen", "--config", str(cfg_path), "--out", str(tmp_path / "d1")]) == 0
        assert (
            main(
                [
                    "gen",
                    "--config",
                    str(cfg_path),
                    "--seed",
                    "999",
                    "--out",
                    str(tmp_path / "d2"),
                ]
            )
            == 0
        )
        a = (tmp_path / "d1" / "train.jsonl").read_bytes()
        b = (tmp_path / "d2" / "train.jsonl").read_bytes()
        assert a != b
