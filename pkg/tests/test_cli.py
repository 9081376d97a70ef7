"""Tests for the command-line interface (exit codes, artifacts, composition)."""

import json

import pytest

from agckan.cli import run


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert run(["gen-dataset", "--n", "20", "--seed", "1", "--out", str(out)]) == 0
    return out / "dataset.bin"


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert run(["frobnicate"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert run(["gen-dataset", "--frob", "1"]) == 1

    def test_bad_arch(self, small_dataset, tmp_path, capsys):
        code = run(["train", "--data", str(small_dataset), "--arch", "18,x,1",
                    "--out", str(tmp_path)])
        assert code == 1

    def test_missing_data_file(self, tmp_path, capsys):
        code = run(["features", "--data", str(tmp_path / "nope.bin"),
                    "--out", str(tmp_path)])
        assert code == 2

    def test_eval_schema_mismatch(self, small_dataset, tmp_path, capsys):
        # [TRIVIAL: negative case] a non-model JSON must exit 2, not crash
        bad = tmp_path / "bad_model.json"
        bad.write_text(json.dumps({"format": "something", "version": 1}))
        code = run(["eval", "--data", str(small_dataset), "--model", str(bad),
                    "--symbolic", str(bad), "--out", str(tmp_path)])
        assert code == 2
        assert "error" in capsys.readouterr().err


class TestGenDataset:
    def test_deterministic_bytes(self, tmp_path, capsys):
        # [TRIVIAL: determinism]
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(["gen-dataset", "--n", "10", "--seed", "1", "--out", str(a)]) == 0
        assert run(["gen-dataset", "--n", "10", "--seed", "1", "--out", str(b)]) == 0
        capsys.readouterr()
        assert read(a / "dataset.bin") == read(b / "dataset.bin")

    def test_different_seed_differs(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        run(["gen-dataset", "--n", "10", "--seed", "1", "--out", str(a)])
        run(["gen-dataset", "--n", "10", "--seed", "2", "--out", str(b)])
        capsys.readouterr()
        assert read(a / "dataset.bin") != read(b / "dataset.bin")


class TestSimulateAndPlot:
    def test_simulate_trace(self, tmp_path, capsys):
        assert run(["simulate", "--seed", "3", "--out", str(tmp_path)]) == 0
        capsys.readouterr()
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        assert lines[0] == "t,dp_tie,df1,df2"
        assert len(lines) == 301  # header + 300 samples at 0.2 s over 60 s

    def test_simulate_attacked(self, tmp_path, capsys):
        assert run(["simulate", "--seed", "3", "--attacked",
                    "--out", str(tmp_path)]) == 0
        capsys.readouterr()

    def test_plot_svg(self, tmp_path, capsys):
        assert run(["plot", "--seed", "4", "--out", str(tmp_path)]) == 0
        capsys.readouterr()
        svg = (tmp_path / "plot.svg").read_text()
        assert svg.startswith("<svg")
        assert svg.count("<polyline") == 6  # clean+attacked for 3 channels
        assert "dF1" in svg


class TestFeatures:
    def test_features_csv(self, small_dataset, tmp_path, capsys):
        assert run(["features", "--data", str(small_dataset),
                    "--out", str(tmp_path)]) == 0
        capsys.readouterr()
        lines = (tmp_path / "features.csv").read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")][0]
        assert header.split(",")[-1] == "label"
        assert len(header.split(",")) == 19
        assert len([l for l in lines if not l.startswith("#")]) == 21


@pytest.fixture(scope="module")
def trained(small_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("model")
    code = run(["train", "--data", str(small_dataset), "--arch", "18,2,1",
                "--epochs", "3", "--seed", "1", "--out", str(out)])
    assert code == 0
    return out / "model.json"


class TestModelCommands:

    def test_train_artifacts(self, trained):
        assert trained.exists()
        log = trained.parent / "train_log.csv"
        lines = log.read_text().splitlines()
        assert lines[0] == "epoch,loss,train_acc,val_acc"
        assert len(lines) == 4

    def test_prune_finetune_symbolify_eval(self, small_dataset, trained,
                                           tmp_path, capsys):
        out = str(tmp_path)
        assert run(["prune", "--data", str(small_dataset), "--model",
                    str(trained), "--threshold", "0.0", "--seed", "1",
                    "--out", out]) == 0
        pruned = tmp_path / "model_pruned.json"
        assert run(["finetune", "--data", str(small_dataset), "--model",
                    str(pruned), "--epochs", "2", "--seed", "1",
                    "--out", out]) == 0
        tuned = tmp_path / "model_finetuned.json"
        assert run(["symbolify", "--data", str(small_dataset), "--model",
                    str(tuned), "--seed", "1", "--out", out]) == 0
        assert (tmp_path / "formula.txt").read_text().startswith("xi(x) = ")
        assert (tmp_path / "edge_r2.csv").exists()
        assert run(["eval", "--data", str(small_dataset), "--model",
                    str(tuned), "--symbolic", str(tmp_path / "symbolic.json"),
                    "--seed", "1", "--out", out]) == 0
        capsys.readouterr()
        rep = json.loads((tmp_path / "report.json").read_text())
        assert {"kan", "symbolic", "accuracy_gap"} <= set(rep)


class TestPipelineCommand:
    def test_small_pipeline_runs_and_prints_summary(self, tmp_path, capsys):
        code = run(["pipeline", "--mode", "experiment1", "--n", "20",
                    "--epochs", "3", "--arch", "18,2,1", "--seed", "5",
                    "--out", str(tmp_path)])
        assert code == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["mode"] == "experiment1"
        assert "manifest_digest" in summary
        for name in ("dataset.bin", "model.json", "symbolic.json",
                     "formula.txt", "report.json", "report.csv",
                     "features.csv", "edge_r2.csv", "train_log.csv",
                     "manifest.json"):
            assert (tmp_path / name).exists(), name

    def test_manifest_digest_stamped_everywhere(self, tmp_path, capsys):
        assert run(["pipeline", "--mode", "experiment1", "--n", "16",
                    "--epochs", "2", "--arch", "18,2,1", "--seed", "6",
                    "--out", str(tmp_path)]) == 0
        capsys.readouterr()
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        digest = manifest["digest"]
        for name in ("features.csv", "edge_r2.csv"):
            first = (tmp_path / name).read_text().splitlines()[0]
            assert first == f"# manifest_digest={digest}"
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["manifest_digest"] == digest

    def test_bad_mode(self, tmp_path):
        assert run(["pipeline", "--mode", "experiment3",
                    "--out", str(tmp_path)]) == 1
