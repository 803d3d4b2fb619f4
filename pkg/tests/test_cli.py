"""CLI surface: every subcommand plus the exit-code contract."""
import io
import json
import subprocess
import sys
from contextlib import redirect_stderr, redirect_stdout
from types import SimpleNamespace

import pytest

from callerspace.cli import _threads_from, main
from callerspace.classifiers import ClassifierConfig, save_model, train
from callerspace.classifiers.dataset import LabeledDataset
import numpy as np


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        rc = main([str(a) for a in argv])
    return rc, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """A working directory with the full artifact chain built via the CLI."""
    root = tmp_path_factory.mktemp("cli")
    paths = {
        "store": root / "synth.store",
        "splits": root / "splits.json",
        "groups": root / "groups.json",
        "matrix": root / "matrix.csv",
        "heatmap": root / "matrix.svg",
        "report": root / "report_lsvm.json",
        "roc": root / "roc_lsvm.csv",
        "root": root,
    }
    steps = [
        ("synth", "--callers", 4, "--dim", 6, "--segments", 40,
         "--separation", 4.0, "--seed", 5, "--out", paths["store"]),
        ("split", paths["store"], "--seed", 3, "--out", paths["splits"]),
        ("groups", "build", paths["store"], "--splits", paths["splits"],
         "--train-groups", 6, "--min-group-size", 1, "--out", paths["groups"]),
        ("analyze", "distances", paths["store"], "--groups", paths["groups"],
         "--measure", "kl", "--out", paths["matrix"], "--heatmap", paths["heatmap"]),
        ("detect", paths["store"], "--groups", paths["groups"], "--algo", "lsvm",
         "--folds", 3, "--seed", 3, "--out", paths["report"], "--roc", paths["roc"]),
    ]
    for argv in steps:
        rc, out, err = run_cli(*argv)
        assert rc == 0, (argv[0], err)
    return paths


class TestChain:
    def test_synth_store_validates(self, ws):
        rc, out, _ = run_cli("store", "validate", ws["store"])
        assert rc == 0
        # 10:1 imbalance over 4 callers: 40 + 19 + 9 + 4 segments
        assert "OK" in out and "72 segments" in out and "dim 6" in out

    def test_store_summary_json(self, ws):
        rc, out, _ = run_cli("store", "summary", ws["store"])
        assert rc == 0
        doc = json.loads(out)
        assert doc["total"]["count"] == 72
        assert set(doc["per_caller"]) == {"1", "2", "3", "4"}
        assert doc["per_caller"]["1"]["count"] == 40
        assert doc["per_caller"]["4"]["count"] == 4

    def test_store_summary_csv(self, ws):
        rc, out, _ = run_cli("store", "summary", ws["store"], "--format", "csv")
        assert rc == 0
        lines = out.splitlines()
        assert lines[0] == "scope,id,count,mean_ms,std_ms,median_ms"
        assert lines[1].startswith("total,,72,")
        assert len(lines) == 2 + 4

    def test_split_artifact(self, ws):
        doc = json.loads(ws["splits"].read_text())
        assert doc["seed"] == 3

    def test_groups_artifact(self, ws):
        doc = json.loads(ws["groups"].read_text())
        assert doc["train_groups"] == 6

    def test_matrix_and_heatmap(self, ws):
        text = ws["matrix"].read_text()
        assert text.startswith("caller_a,caller_b,measure,mean,std,count")
        svg = ws["heatmap"].read_text()
        assert svg.startswith("<svg") and "Caller 1" in svg

    def test_detect_report(self, ws):
        doc = json.loads(ws["report"].read_text())
        assert doc["algorithm"] == "lsvm" and doc["model_name"] == "synth"
        assert len(doc["folds"]) == 3
        assert 0.9 <= doc["mean_auc"] <= 1.0  # well separated clusters
        assert ws["roc"].read_text().startswith("fold,class_or_pair,fpr,tpr")

    def test_report_table3(self, ws):
        rc, out, _ = run_cli("report", "table3", ws["report"])
        assert rc == 0
        lines = out.splitlines()
        assert lines[0] == "model_name,lsvm"
        assert lines[1].startswith("synth,")

    def test_report_size_vs_auc(self, ws):
        registry = ws["root"] / "registry.json"
        registry.write_text(json.dumps({"synth": {"param_count_millions": 4.11}}))
        rc, out, _ = run_cli("report", "size-vs-auc", ws["report"],
                             "--registry", registry)
        assert rc == 0
        lines = out.splitlines()
        assert lines[0] == "model_name,param_count_millions,algorithm,mean_auc"
        assert lines[1].startswith("synth,4.11,lsvm,")

    def test_model_inspect(self, ws):
        rng = np.random.default_rng(0)
        x = np.vstack([rng.normal(c * 4.0, size=(12, 3)) for c in range(2)])
        y = np.repeat([1, 2], 12)
        model = train(LabeledDataset(x, y),
                      ClassifierConfig("lsvm", {"C": 1.0, "class_weight": "none"}))
        path = ws["root"] / "model.csm"
        save_model(model, path)
        rc, out, _ = run_cli("model", "inspect", path)
        assert rc == 0
        doc = json.loads(out)
        assert doc["algorithm"] == "lsvm"
        assert doc["classes"] == [1, 2]
        assert doc["parameter_count"] > 0

    def test_run_command_and_idempotence(self, ws):
        bundle = ws["root"] / "bundle"
        cfg = ws["root"] / "run.json"
        cfg.write_text(json.dumps({
            "store": str(ws["store"]),
            "out_dir": str(bundle),
            "seed": 3,
            "groups": {"train_groups": 6, "min_group_size": 1},
            "detect": {"algorithms": ["lsvm"], "folds": 3,
                       "search_space": {"lsvm": {"C": [1.0], "class_weight": ["none"]}}},
        }))
        rc, out, _ = run_cli("run", cfg)
        assert rc == 0 and "executed" in out
        assert (bundle / "manifest.json").exists()
        rc, out, _ = run_cli("run", cfg)
        assert rc == 0 and "already up to date" in out


class TestExitCodes:
    def test_usage_error_is_1(self):
        rc, _, err = run_cli("no-such-command")
        assert rc == 1 and "error:" in err

    def test_bad_algo_is_1(self, ws):
        rc, _, err = run_cli("detect", ws["store"], "--groups", ws["groups"],
                             "--algo", "gbm", "--out", "x.json")
        assert rc == 1 and "invalid choice" in err

    def test_bad_ratios_is_1(self, ws, tmp_path):
        rc, _, err = run_cli("split", ws["store"], "--ratios", "0.5,0.5",
                             "--out", tmp_path / "s.json")
        assert rc == 1 and "three comma-separated values" in err

    def test_missing_store_is_2(self, tmp_path):
        rc, _, err = run_cli("store", "validate", tmp_path / "absent.store")
        assert rc == 2

    def test_corrupt_store_is_2(self, tmp_path):
        bad = tmp_path / "bad.store"
        bad.write_bytes(b"JUNKJUNKJUNKJUNK")
        rc, _, err = run_cli("store", "validate", bad)
        assert rc == 2 and "error:" in err

    def test_run_invalid_json_is_1(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{nope")
        rc, _, err = run_cli("run", cfg)
        assert rc == 1 and "invalid JSON" in err

    def test_run_missing_config_is_1(self, tmp_path):
        rc, _, err = run_cli("run", tmp_path / "absent.json")
        assert rc == 1 and "not found" in err

    def test_unexpected_exception_is_3(self, ws, monkeypatch):
        import callerspace.cli as cli_mod

        def boom(path):
            raise RuntimeError("wires crossed")

        monkeypatch.setattr(cli_mod, "read_store", boom)
        rc, _, err = run_cli("store", "validate", ws["store"])
        assert rc == 3 and "internal error" in err

    def test_help_exits_zero(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("--help")
        assert exc.value.code == 0


class TestThreads:
    def test_default_is_one(self, monkeypatch):
        monkeypatch.delenv("CALLERSPACE_THREADS", raising=False)
        assert _threads_from(SimpleNamespace(threads=None)) == 1

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("CALLERSPACE_THREADS", "8")
        assert _threads_from(SimpleNamespace(threads=None)) == 8

    def test_flag_beats_env(self, monkeypatch):
        monkeypatch.setenv("CALLERSPACE_THREADS", "8")
        assert _threads_from(SimpleNamespace(threads=2)) == 2

    def test_floor_is_one(self, monkeypatch):
        monkeypatch.setenv("CALLERSPACE_THREADS", "0")
        assert _threads_from(SimpleNamespace(threads=None)) == 1


def test_console_script_installed(ws):
    out = subprocess.run(
        [sys.executable, "-m", "callerspace.cli", "store", "validate", str(ws["store"])],
        capture_output=True, text=True,
    )
    assert out.returncode == 0 and "OK" in out.stdout
    script = subprocess.run(["callerspace", "--help"], capture_output=True, text=True)
    assert script.returncode == 0
    assert "Caller discrimination" in script.stdout
