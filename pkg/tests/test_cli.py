import json
from pathlib import Path

import pytest

from urex.cli import run
from urex.corpus import bijective_synth_config, save_corpus, synth_corpus


@pytest.fixture()
def synth_config_file(tmp_path):
    config = bijective_synth_config(
        n_instances=300, entities_per_type=20, entity_affinity=0.3, seed=5
    )
    path = tmp_path / "synth.json"
    path.write_text(json.dumps(config.to_dict()), encoding="utf-8")
    return path


@pytest.fixture()
def corpus_file(tmp_path):
    corpus = synth_corpus(
        bijective_synth_config(n_instances=300, entities_per_type=20, entity_affinity=0.3, seed=5)
    )
    path = tmp_path / "corpus.jsonl"
    save_corpus(corpus, path)
    return path


class TestSynthCommand:
    def test_writes_the_configured_number_of_lines(self, synth_config_file, tmp_path, capsys):
        out = tmp_path / "corpus.jsonl"
        code = run(["synth", "--config", str(synth_config_file), "--out", str(out)])
        assert code == 0
        assert len(out.read_text(encoding="utf-8").splitlines()) == 300

    def test_same_seed_byte_identical(self, synth_config_file, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert run(["synth", "--config", str(synth_config_file), "--out", str(a), "--seed", "9"]) == 0
        assert run(["synth", "--config", str(synth_config_file), "--out", str(b), "--seed", "9"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_config_is_a_data_error(self, tmp_path):
        code = run(["synth", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x")])
        assert code == 2


class TestEtypeCommand:
    def test_report_contains_all_metric_keys(self, corpus_file, tmp_path):
        report = tmp_path / "report.json"
        labels = tmp_path / "labels.json"
        code = run(
            ["etype", "--corpus", str(corpus_file), "--out", str(labels), "--report", str(report)]
        )
        assert code == 0
        obj = json.loads(report.read_text(encoding="utf-8"))
        assert set(obj) >= {"b3", "v", "ari", "n_evaluated", "trivial_homogeneity_v"}
        assert obj["b3"]["f1"] == pytest.approx(100.0)
        labels_obj = json.loads(labels.read_text(encoding="utf-8"))
        assert len(labels_obj["labels"]) == 300

    def test_byte_identical_outputs(self, corpus_file, tmp_path):
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        assert run(["etype", "--corpus", str(corpus_file), "--report", str(r1)]) == 0
        assert run(["etype", "--corpus", str(corpus_file), "--report", str(r2)]) == 0
        assert r1.read_bytes() == r2.read_bytes()


class TestEvalCommand:
    def test_evaluates_a_saved_clustering(self, corpus_file, tmp_path):
        labels = tmp_path / "labels.json"
        run(["etype", "--corpus", str(corpus_file), "--out", str(labels)])
        report = tmp_path / "report.json"
        code = run(
            ["eval", "--pred", str(labels), "--corpus", str(corpus_file), "--report", str(report)]
        )
        assert code == 0
        assert json.loads(report.read_text(encoding="utf-8"))["ari"] == pytest.approx(100.0)

    def test_length_mismatch_names_both_lengths(self, corpus_file, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"labels": ["a", "b"]}), encoding="utf-8")
        code = run(["eval", "--pred", str(bad), "--corpus", str(corpus_file)])
        assert code == 2
        err = capsys.readouterr().err
        assert "2" in err and "300" in err


class TestStatsCommand:
    def test_schema_and_percentages(self, corpus_file, tmp_path):
        out = tmp_path / "stats.json"
        assert run(["stats", "--corpus", str(corpus_file), "--out", str(out)]) == 0
        stats = json.loads(out.read_text(encoding="utf-8"))
        assert stats["n_instances"] == 300
        assert stats["n_labelled"] == 300
        assert sum(r["pct"] for r in stats["relations"]) == pytest.approx(100.0)
        counts = [r["count"] for r in stats["relations"]]
        assert counts == sorted(counts, reverse=True)


class TestTrainCommand:
    def test_single_run_writes_summary_and_report(self, corpus_file, tmp_path):
        out = tmp_path / "summary.json"
        report = tmp_path / "report.json"
        model = tmp_path / "model.json"
        code = run(
            [
                "train",
                "--corpus", str(corpus_file),
                "--clusters", "16",
                "--seed", "1",
                "--runs", "1",
                "--out", str(out),
                "--report", str(report),
                "--save-model", str(model),
                "--config", str(_fast_config(tmp_path)),
            ]
        )
        assert code == 0
        summary = json.loads(out.read_text(encoding="utf-8"))
        assert summary["config"]["n_relations"] == 16
        assert len(summary["runs"]) == 1
        assert "history" in summary["runs"][0]
        assert json.loads(report.read_text(encoding="utf-8"))["n_runs"] == 1
        assert json.loads(model.read_text(encoding="utf-8"))["format"] == "urex-checkpoint-v1"

    def test_repeat_runs_are_byte_identical(self, corpus_file, tmp_path):
        outs = []
        for name in ("o1.json", "o2.json"):
            out = tmp_path / name
            code = run(
                [
                    "train",
                    "--corpus", str(corpus_file),
                    "--runs", "1",
                    "--seed", "3",
                    "--out", str(out),
                    "--config", str(_fast_config(tmp_path)),
                ]
            )
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


def _fast_config(tmp_path):
    path = tmp_path / "train_config.json"
    if not path.exists():
        path.write_text(
            json.dumps({"max_epochs": 2, "n_relations": 10, "dim": 4, "k_negatives": 2}),
            encoding="utf-8",
        )
    return path


class TestOracleLossCommand:
    def test_single_setting_curve_file(self, corpus_file, tmp_path):
        out_dir = tmp_path / "curves"
        code = run(
            [
                "oracle-loss",
                "--corpus", str(corpus_file),
                "--setting", "OneRelation",
                "--epochs", "2",
                "--runs", "1",
                "--out", str(out_dir),
                "--config", str(_fast_config(tmp_path)),
            ]
        )
        assert code == 0
        curve = json.loads((out_dir / "oracle_OneRelation.json").read_text(encoding="utf-8"))
        assert curve["setting"] == "OneRelation"
        assert [row["epoch"] for row in curve["epochs"]] == [0, 1, 2]

    def test_unknown_setting_is_a_usage_error(self, corpus_file, tmp_path):
        code = run(
            ["oracle-loss", "--corpus", str(corpus_file), "--setting", "Nope", "--out", str(tmp_path)]
        )
        assert code == 1

    def test_byte_identical_curves(self, corpus_file, tmp_path):
        dirs = []
        for name in ("c1", "c2"):
            out_dir = tmp_path / name
            code = run(
                [
                    "oracle-loss",
                    "--corpus", str(corpus_file),
                    "--setting", "Rand10",
                    "--epochs", "2",
                    "--runs", "2",
                    "--seed", "11",
                    "--out", str(out_dir),
                    "--config", str(_fast_config(tmp_path)),
                ]
            )
            assert code == 0
            dirs.append((out_dir / "oracle_Rand10.json").read_bytes())
        assert dirs[0] == dirs[1]


class TestUsageErrors:
    def test_unknown_flag_exits_1(self, capsys):
        assert run(["stats", "--nope"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_missing_subcommand_exits_1(self):
        assert run([]) == 1

    def test_help_for_every_subcommand(self, capsys):
        for command in ("synth", "etype", "train", "eval", "oracle-loss", "stats"):
            with pytest.raises(SystemExit) as excinfo:
                run([command, "--help"])
            assert excinfo.value.code == 0
            help_text = capsys.readouterr().out
            assert "--" in help_text
