"""Command-line behavior: exit codes, JSON output, overrides, determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from engagekit.checkpoint import save_checkpoint
from engagekit.cli import (EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OK,
                           _apply_thread_cap, main)
from engagekit.errors import ConfigError
from engagekit.facegraph import face_graph
from engagekit.manifest import DatasetManifest, ManifestEntry, save_manifest
from engagekit.model import build_network


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("clidata")
    rc = main(["synth", "--out", str(out), "--samples", "8", "--classes", "2",
               "--frames", "8", "--seed", "5", "--val-fraction", "0.25"])
    assert rc == EXIT_OK
    return out


def _config_doc(corpus_dir, out_dir, **train_kw):
    train = {"epochs": 2, "batch_size": 4, "seed": 3, "log_timing": False}
    train.update(train_kw)
    return {
        "data": {"manifest": str(corpus_dir / "manifest.jsonl")},
        "model": {"K": 2, "channels": [2], "temporal_kernel": 3, "dropout": 0.0},
        "train": train,
        "paths": {"out_dir": str(out_dir)},
    }


def _write_config(path, doc):
    Path(path).write_text(json.dumps(doc))
    return str(path)


def _stdout_json(capsys):
    out = capsys.readouterr()
    return json.loads(out.out), out.err


def _stderr_json(capsys):
    out = capsys.readouterr()
    return json.loads(out.err)


# ---------------------------------------------------------------------------
# graph and synth

def test_graph_export_stdout(capsys):
    assert main(["graph", "export"]) == EXIT_OK
    doc, _ = _stdout_json(capsys)
    g = face_graph()
    assert doc["node_count"] == g.node_count
    assert len(doc["edges"]) == len(g.edges)
    assert len(doc["template"]) == g.node_count


def test_graph_export_to_file(tmp_path, capsys):
    out = tmp_path / "graph.json"
    assert main(["graph", "export", "--out", str(out)]) == EXIT_OK
    doc, _ = _stdout_json(capsys)
    assert doc == {"written": str(out)}
    on_disk = json.loads(out.read_text())
    assert on_disk["node_count"] == face_graph().node_count


def test_synth_reports_outputs(corpus, capsys):
    # fixture already ran the command; run again into a subdir for stdout
    sub = corpus / "again"
    assert main(["synth", "--out", str(sub), "--samples", "4", "--classes", "2",
                 "--frames", "6", "--seed", "1"]) == EXIT_OK
    doc, _ = _stdout_json(capsys)
    assert doc["written"] == 4
    assert Path(doc["manifest_path"]).is_file()


# ---------------------------------------------------------------------------
# full pipeline through the CLI

def test_train_eval_infer_explain_pipeline(corpus, tmp_path, capsys):
    cfg = _write_config(tmp_path / "cfg.json", _config_doc(corpus, tmp_path / "run"))
    assert main(["train", "--config", cfg]) == EXIT_OK
    doc, _ = _stdout_json(capsys)
    ckpt = doc["checkpoint_path"]
    assert Path(ckpt).is_file()
    assert Path(doc["log_path"]).is_file()
    assert doc["epochs_run"] == 2

    manifest = str(corpus / "manifest.jsonl")
    assert main(["eval", "--ckpt", ckpt, "--manifest", manifest,
                 "--split", "val"]) == EXIT_OK
    doc, _ = _stdout_json(capsys)
    assert 0.0 <= doc["accuracy"] <= 1.0
    assert len(doc["confusion"]) == 2
    assert doc["count"] == 2

    sample = str(corpus / "synth-00000.flmk")
    assert main(["infer", "--ckpt", ckpt, "--sample", sample]) == EXIT_OK
    doc, _ = _stdout_json(capsys)
    assert doc["sample_id"] == "synth-00000"
    assert doc["head_mode"] == "kclass"
    assert len(doc["probabilities"]) == 2
    assert abs(sum(doc["probabilities"]) - 1.0) < 1e-9
    assert doc["predicted_class"] == int(np.argmax(doc["probabilities"]))

    sal_path = tmp_path / "sal.json"
    assert main(["explain", "--ckpt", ckpt, "--sample", sample,
                 "--class", "1", "--out", str(sal_path)]) == EXIT_OK
    capsys.readouterr()
    sal = json.loads(sal_path.read_text())
    assert sal["target_class"] == 1
    assert len(sal["values"]) == sal["frames"] * sal["nodes"]
    assert "points" not in sal

    # phase 2 rides on the phase-1 checkpoint
    cfg2 = _write_config(tmp_path / "cfg2.json",
                         _config_doc(corpus, tmp_path / "run"))
    assert main(["train-ordinal", "--config", cfg2, "--base", ckpt]) == EXIT_OK
    doc, _ = _stdout_json(capsys)
    ord_ckpt = doc["checkpoint_path"]
    assert ord_ckpt.endswith("model_ordinal.stgc")

    assert main(["infer", "--ckpt", ord_ckpt, "--sample", sample]) == EXIT_OK
    doc, _ = _stdout_json(capsys)
    assert doc["head_mode"] == "binary_heads"
    assert abs(sum(doc["probabilities"]) - 1.0) < 1e-9


def test_explain_points_cloud(corpus, tmp_path, capsys):
    cfg = _write_config(tmp_path / "cfg.json",
                        _config_doc(corpus, tmp_path / "run", epochs=1))
    assert main(["train", "--config", cfg]) == EXIT_OK
    ckpt, _ = _stdout_json(capsys)
    sample = str(corpus / "synth-00001.flmk")
    out = tmp_path / "sal.json"
    assert main(["explain", "--ckpt", ckpt["checkpoint_path"], "--sample", sample,
                 "--class", "0", "--out", str(out), "--points"]) == EXIT_OK
    capsys.readouterr()
    sal = json.loads(out.read_text())
    assert len(sal["points"]) == sal["frames"] * sal["nodes"]
    for row in sal["points"][:10]:
        assert len(row) == 3
        assert 0.0 <= row[2] <= 1.0


def test_train_twice_is_deterministic(corpus, tmp_path, capsys):
    # identical invocations (same config file, same out dir) must produce
    # byte-identical artifacts; the checkpoint embeds the resolved config,
    # so the out dir has to match too
    out_dir = tmp_path / "run"
    cfg = _write_config(tmp_path / "cfg.json", _config_doc(corpus, out_dir))
    assert main(["train", "--config", cfg]) == EXIT_OK
    capsys.readouterr()
    first_ckpt = (out_dir / "model.stgc").read_bytes()
    first_log = (out_dir / "metrics.jsonl").read_bytes()
    assert main(["train", "--config", cfg]) == EXIT_OK
    capsys.readouterr()
    assert (out_dir / "model.stgc").read_bytes() == first_ckpt
    assert (out_dir / "metrics.jsonl").read_bytes() == first_log


def test_epochs_flag_overrides_config(corpus, tmp_path, capsys):
    out_dir = tmp_path / "run"
    cfg = _write_config(tmp_path / "cfg.json",
                        _config_doc(corpus, out_dir, epochs=2))
    assert main(["train", "--config", cfg, "--epochs", "1"]) == EXIT_OK
    doc, _ = _stdout_json(capsys)
    assert doc["epochs_run"] == 1
    assert len((out_dir / "metrics.jsonl").read_text().splitlines()) == 1


def test_eval_on_perfect_fixture(corpus, tmp_path, capsys):
    # a 3-class model biased to always answer 1, over a val split of 1s
    net = build_network(face_graph(), 3, channels=(2,), gamma=3, dropout=0.0)
    net.params["head.weight"].data[:] = 0.0
    net.params["head.bias"].data[:] = np.array([0.0, 5.0, 0.0], dtype=np.float32)
    ckpt = tmp_path / "biased.stgc"
    save_checkpoint(net, ckpt)
    mani = DatasetManifest(
        entries=[ManifestEntry("synth-00000.flmk", 1, "val"),
                 ManifestEntry("synth-00001.flmk", 1, "val")],
        class_count=3)
    mani_path = corpus / "all_ones.jsonl"
    save_manifest(mani, mani_path)
    assert main(["eval", "--ckpt", str(ckpt), "--manifest", str(mani_path),
                 "--split", "val"]) == EXIT_OK
    doc, _ = _stdout_json(capsys)
    assert doc["accuracy"] == 1.0
    assert doc["mae"] == 0.0


# ---------------------------------------------------------------------------
# exit codes

def test_unknown_config_keys_exit_2(corpus, tmp_path, capsys):
    doc = _config_doc(corpus, tmp_path)
    doc["train"]["lr"] = 0.1
    doc["modle"] = {}
    cfg = _write_config(tmp_path / "bad.json", doc)
    assert main(["train", "--config", cfg]) == EXIT_CONFIG
    err = _stderr_json(capsys)
    problems = "\n".join(err["error"]["problems"])
    assert "train.lr" in problems and "modle" in problems


def test_missing_config_file_exit_2(capsys):
    assert main(["train", "--config", "/nope/cfg.json"]) == EXIT_CONFIG
    err = _stderr_json(capsys)
    assert "not found" in err["error"]["problems"][0]


def test_missing_checkpoint_exit_3(corpus, capsys):
    rc = main(["infer", "--ckpt", "/nope/model.stgc",
               "--sample", str(corpus / "synth-00000.flmk")])
    assert rc == EXIT_DATA
    err = _stderr_json(capsys)
    assert err["error"]["code"] == EXIT_DATA


def test_corrupt_sample_exit_3(corpus, tmp_path, capsys):
    net = build_network(face_graph(), 2, channels=(2,), gamma=3, dropout=0.0)
    ckpt = tmp_path / "m.stgc"
    save_checkpoint(net, ckpt)
    bad = tmp_path / "junk.flmk"
    bad.write_bytes(b"JUNKDATA" * 4)
    assert main(["infer", "--ckpt", str(ckpt), "--sample", str(bad)]) == EXIT_DATA
    err = _stderr_json(capsys)
    assert err["error"]["type"] == "FormatError"


def test_empty_split_exit_3(corpus, tmp_path, capsys):
    net = build_network(face_graph(), 2, channels=(2,), gamma=3, dropout=0.0)
    ckpt = tmp_path / "m.stgc"
    save_checkpoint(net, ckpt)
    rc = main(["eval", "--ckpt", str(ckpt),
               "--manifest", str(corpus / "manifest.jsonl"), "--split", "test"])
    assert rc == EXIT_DATA
    capsys.readouterr()


def test_undefined_metric_exit_4(corpus, tmp_path, capsys):
    # binary eval wants a ranking metric, but the split holds one class
    net = build_network(face_graph(), 2, channels=(2,), gamma=3, dropout=0.0)
    ckpt = tmp_path / "m.stgc"
    save_checkpoint(net, ckpt)
    # both labels appear (so the class count reads as 2) but val is pure
    mani = DatasetManifest(
        entries=[ManifestEntry("synth-00001.flmk", 1, "train"),
                 ManifestEntry("synth-00000.flmk", 0, "val"),
                 ManifestEntry("synth-00002.flmk", 0, "val")],
        class_count=2)
    mani_path = corpus / "one_class.jsonl"
    save_manifest(mani, mani_path)
    rc = main(["eval", "--ckpt", str(ckpt), "--manifest", str(mani_path),
               "--split", "val"])
    assert rc == EXIT_NUMERIC
    err = _stderr_json(capsys)
    assert err["error"]["type"] == "UndefinedMetricError"


# ---------------------------------------------------------------------------
# thread cap

def test_thread_cap_min_semantics():
    env = {"ENGAGE_THREADS": "2", "OMP_NUM_THREADS": "8",
           "MKL_NUM_THREADS": "1"}
    _apply_thread_cap(env)
    assert env["OMP_NUM_THREADS"] == "2"       # capped down
    assert env["MKL_NUM_THREADS"] == "1"       # existing lower value kept
    assert env["OPENBLAS_NUM_THREADS"] == "2"  # unset vars get the cap
    assert env["VECLIB_MAXIMUM_THREADS"] == "2"
    assert env["NUMEXPR_NUM_THREADS"] == "2"


def test_thread_cap_absent_is_noop():
    env = {"OMP_NUM_THREADS": "8"}
    _apply_thread_cap(env)
    assert env == {"OMP_NUM_THREADS": "8"}


@pytest.mark.parametrize("bad", ["zebra", "0", "-3", "1.5"])
def test_thread_cap_rejects_bad_values(bad):
    with pytest.raises(ConfigError):
        _apply_thread_cap({"ENGAGE_THREADS": bad})


def test_thread_cap_error_exit_2(monkeypatch, capsys):
    monkeypatch.setenv("ENGAGE_THREADS", "zebra")
    assert main(["graph", "export"]) == EXIT_CONFIG
    err = _stderr_json(capsys)
    assert "ENGAGE_THREADS" in err["error"]["problems"][0]
