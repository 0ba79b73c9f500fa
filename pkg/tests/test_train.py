"""Training loop behavior: schedule, determinism, resume, edge cases."""

import json

import numpy as np
import pytest

from engagekit.checkpoint import load_checkpoint
from engagekit.errors import ConfigError, DivergenceError, ValidationError
from engagekit.manifest import load_manifest
from engagekit.model import HEAD_BINARY, build_network
from engagekit.service import handlers, schemas
from engagekit.train import (MetricsLog, TrainConfig, fit_kclass,
                             fit_ordinal_heads, lr_at, predict_ordinal,
                             stack_dataset, train_base, train_ordinal_heads)


def _toy_data(n=8, t=8, k=2, seed=0, nodes=3):
    """Linearly separable toy batch: per-class mean shift over noise."""
    rng = np.random.default_rng(seed)
    y = (np.arange(n) % k).astype(np.int64)
    x = rng.normal(0.0, 0.3, size=(n, 3, t, nodes))
    x += y[:, None, None, None] - (k - 1) / 2
    return x.astype(np.float32), y


def _tiny_net(graph, k=2, seed=0, channels=(2,), **kw):
    kw.setdefault("gamma", 3)
    kw.setdefault("dropout", 0.0)
    return build_network(graph, k, seed=seed, channels=channels, **kw)


def _cfg(**kw):
    kw.setdefault("epochs", 3)
    kw.setdefault("batch_size", 4)
    kw.setdefault("log_timing", False)
    return TrainConfig(**kw)


# ---------------------------------------------------------------------------
# learning-rate schedule

def test_lr_schedule_decade_steps():
    cfg = TrainConfig()
    assert lr_at(0, cfg) == pytest.approx(0.001, rel=1e-12)
    assert lr_at(99, cfg) == pytest.approx(0.001, rel=1e-12)
    assert lr_at(100, cfg) == pytest.approx(0.0001, rel=1e-12)
    assert lr_at(299, cfg) == pytest.approx(0.00001, rel=1e-12)


def test_lr_schedule_follows_config():
    cfg = TrainConfig(base_lr=0.5, lr_decay=0.5, decay_every=2)
    assert [lr_at(e, cfg) for e in range(5)] == [0.5, 0.5, 0.25, 0.25, 0.125]


def test_config_validation_aggregates():
    cfg = TrainConfig(batch_size=0, base_lr=-1.0, epochs=0)
    with pytest.raises(ConfigError) as err:
        cfg.validate()
    text = "\n".join(err.value.problems)
    assert "batch_size" in text and "base_lr" in text and "epochs" in text


# ---------------------------------------------------------------------------
# epoch engine edge cases

def test_empty_split_rejected(triangle_graph):
    with pytest.raises(ValidationError, match="empty split"):
        stack_dataset([])
    x, y = _toy_data()
    net = _tiny_net(triangle_graph)
    empty = np.zeros((0, 3, 8, 3), dtype=np.float32)
    with pytest.raises(ValidationError, match="empty split"):
        fit_kclass(net, x, y, empty, np.zeros(0, dtype=np.int64), _cfg())


def test_batch_larger_than_dataset_is_one_batch(triangle_graph):
    x, y = _toy_data(n=6)
    net = _tiny_net(triangle_graph)
    log = MetricsLog()
    _, payload = fit_kclass(net, x, y, x, y, _cfg(batch_size=64, epochs=3), log)
    # one optimizer step per epoch: the whole set fits in a single batch
    assert payload["optimizer"].step == 3
    assert all(np.isfinite(r["train_loss"]) for r in log.records)


def test_loss_descends_at_small_lr(triangle_graph):
    x, y = _toy_data(n=12, seed=3)
    net = _tiny_net(triangle_graph, channels=(4,))
    log = MetricsLog()
    fit_kclass(net, x, y, x, y, _cfg(base_lr=1e-5, epochs=6, batch_size=12), log)
    first, last = log.records[0]["train_loss"], log.records[-1]["train_loss"]
    assert last < first


def test_nan_loss_aborts_with_diagnostic(triangle_graph):
    x, y = _toy_data()
    net = _tiny_net(triangle_graph)
    net.params["head.weight"].data[0, 0] = np.nan
    with pytest.raises(DivergenceError, match="epoch 0"):
        fit_kclass(net, x, y, x, y, _cfg())


def test_imbalanced_classes_train_fine(triangle_graph):
    x, _ = _toy_data(n=8)
    y = np.array([0, 0, 0, 0, 0, 0, 0, 1], dtype=np.int64)
    net = _tiny_net(triangle_graph)
    result, _ = fit_kclass(net, x, y, x, y, _cfg())
    assert 0.0 <= result.best_val_accuracy <= 1.0


def test_log_record_keys_and_schedule(triangle_graph, tmp_path):
    x, y = _toy_data()
    net = _tiny_net(triangle_graph)
    path = tmp_path / "metrics.jsonl"
    log = MetricsLog(path)
    fit_kclass(net, x, y, x, y, _cfg(epochs=5, eval_every=2), log)
    log.close()
    lines = [json.loads(s) for s in path.read_text().splitlines()]
    assert len(lines) == 5
    for rec in lines:
        assert set(rec) == {"epoch", "lr", "train_loss", "val_accuracy", "wall_ms"}
    # eval_every=2 evaluates on epochs 1 and 3; the final epoch always does
    assert [r["val_accuracy"] is None for r in lines] == [
        True, False, True, False, False]


def test_seeded_runs_write_identical_logs(triangle_graph, tmp_path):
    x, y = _toy_data(n=8)
    paths = []
    for run in range(2):
        net = _tiny_net(triangle_graph, seed=7)
        p = tmp_path / f"run{run}.jsonl"
        log = MetricsLog(p)
        fit_kclass(net, x, y, x, y, _cfg(seed=5, epochs=4), log)
        log.close()
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


# ---------------------------------------------------------------------------
# manifest-level runs and resume

@pytest.fixture(scope="module")
def tiny_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    resp = handlers.synth(schemas.SynthRequest(
        out_dir=str(out), samples=8, classes=2, frames=8, seed=5,
        val_fraction=0.25))
    return load_manifest(resp.manifest_path), str(out)


def _run_base(mani, base_dir, tmp_path, tag, **kw):
    cfg = _cfg(epochs=kw.pop("epochs", 6), batch_size=4, seed=2)
    return train_base(
        mani, _graph(), cfg, k=2, base_dir=base_dir,
        log_path=tmp_path / f"{tag}.jsonl",
        ckpt_path=tmp_path / f"{tag}.stgc",
        save_resume_path=tmp_path / f"{tag}.resume.stgc",
        channels=(2,), gamma=3, dropout=0.0, **kw)


def _graph():
    from engagekit.facegraph import face_graph
    return face_graph()


def test_resume_matches_uninterrupted_run(tiny_corpus, tmp_path):
    mani, base_dir = tiny_corpus
    _run_base(mani, base_dir, tmp_path, "full", epochs=6)

    # same run split at epoch 3, resumed from the saved state
    _run_base(mani, base_dir, tmp_path, "split", epochs=6, stop_epoch=3)
    cfg = _cfg(epochs=6, batch_size=4, seed=2)
    train_base(mani, _graph(), cfg, k=2, base_dir=base_dir,
               log_path=tmp_path / "split.jsonl", log_append=True,
               ckpt_path=tmp_path / "split.stgc",
               resume_path=tmp_path / "split.resume.stgc",
               save_resume_path=tmp_path / "split.resume.stgc",
               channels=(2,), gamma=3, dropout=0.0)

    full = (tmp_path / "full.stgc").read_bytes()
    split = (tmp_path / "split.stgc").read_bytes()
    assert full == split
    assert (tmp_path / "full.resume.stgc").read_bytes() == \
        (tmp_path / "split.resume.stgc").read_bytes()
    assert (tmp_path / "full.jsonl").read_bytes() == \
        (tmp_path / "split.jsonl").read_bytes()


def test_checkpoint_meta_records_run(tiny_corpus, tmp_path):
    mani, base_dir = tiny_corpus
    result = _run_base(mani, base_dir, tmp_path, "meta", epochs=2)
    _, meta, _, _ = load_checkpoint(tmp_path / "meta.stgc", _graph(), expect_k=2)
    assert meta["best_val_accuracy"] == result.best_val_accuracy
    assert meta["best_epoch"] == result.best_epoch
    assert meta["config"]["epochs"] == 2


def test_ordinal_phase_freezes_backbone(tiny_corpus, tmp_path):
    mani, base_dir = tiny_corpus
    _run_base(mani, base_dir, tmp_path, "base", epochs=2)
    cfg = _cfg(epochs=3, batch_size=4, seed=2)
    result = train_ordinal_heads(
        tmp_path / "base.stgc", mani, _graph(), cfg, base_dir=base_dir,
        log_path=tmp_path / "ord.jsonl", ckpt_path=tmp_path / "ord.stgc")
    assert result.net.head_mode == HEAD_BINARY

    base_net, _, _, _ = load_checkpoint(tmp_path / "base.stgc", _graph())
    ord_net, _, _, _ = load_checkpoint(tmp_path / "ord.stgc", _graph(),
                                       expect_head_mode=HEAD_BINARY)
    base_arrays = base_net.state_arrays()
    for name, arr in ord_net.state_arrays().items():
        if name.startswith("head"):
            continue
        np.testing.assert_array_equal(arr, base_arrays[name])


def test_two_class_ordinal_single_head(triangle_graph):
    x, y = _toy_data(n=8, k=2)
    base = _tiny_net(triangle_graph, k=2)
    result = fit_ordinal_heads(base, x, y, x, y, _cfg(epochs=2))
    heads = [n for n in result.net.params if n.startswith("head.bin")]
    assert sorted(heads) == ["head.bin.0.bias", "head.bin.0.weight"]
    pred = predict_ordinal(result.net, x, batch_size=4)
    assert set(np.unique(pred)) <= {0, 1}
