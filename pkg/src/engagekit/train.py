"""Two-phase training: K-class backbone, then frozen-backbone binary heads.

Both phases share one epoch engine: seeded shuffling, Adam with the
step-decayed learning rate, per-epoch JSONL metrics, best-validation
snapshotting, and NaN abort.  All randomness flows through a single
numpy Generator whose state is serialized into resume checkpoints, so
an interrupted run continues bit-exactly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DivergenceError, ValidationError
from .checkpoint import load_checkpoint, save_checkpoint
from .facegraph import FaceGraphSpec
from .landmarks import PreprocessConfig, batch_features, preprocess
from .manifest import DatasetManifest, load_split_sequences
from .model import HEAD_KCLASS, StgcnNetwork, build_network, with_binary_heads
from .optim import AdamState, adam_state_for, adam_step, zero_grads
from .ordinal import binary_targets, decode_batch


@dataclass
class TrainConfig:
    batch_size: int = 16
    base_lr: float = 0.001
    epochs: int = 300
    lr_decay: float = 0.1
    decay_every: int = 100
    seed: int = 0
    head_mode: str = HEAD_KCLASS
    eval_every: int = 1
    log_timing: bool = True

    def validate(self):
        problems = []
        if self.batch_size < 1:
            problems.append(f"batch_size must be positive, got {self.batch_size}")
        if self.base_lr <= 0:
            problems.append(f"base_lr must be positive, got {self.base_lr}")
        if self.epochs < 1:
            problems.append(f"epochs must be positive, got {self.epochs}")
        if not 0 < self.lr_decay <= 1:
            problems.append(f"lr_decay must be in (0, 1], got {self.lr_decay}")
        if self.decay_every < 1:
            problems.append(f"decay_every must be positive, got {self.decay_every}")
        if self.eval_every < 1:
            problems.append(f"eval_every must be positive, got {self.eval_every}")
        if problems:
            raise ConfigError(problems)


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Step decay: base_lr * decay^(epoch // decay_every), 0-indexed."""
    return cfg.base_lr * cfg.lr_decay ** (epoch // cfg.decay_every)


@dataclass
class TrainResult:
    net: StgcnNetwork
    best_val_accuracy: float
    best_epoch: int
    best_arrays: dict
    val_mae: float
    records: list = field(default_factory=list)


class MetricsLog:
    """JSON Lines metrics writer; one sorted-key record per epoch."""

    def __init__(self, path=None, append: bool = False):
        self.path = path
        self.records = []
        self._fh = open(path, "a" if append else "w") if path else None

    def write(self, record: dict):
        self.records.append(record)
        if self._fh is not None:
            self._fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def stack_dataset(pairs, pre: PreprocessConfig | None = None):
    """[(sequence, label)] -> ((n, 3, T, N) float32, (n,) int64)."""
    if not pairs:
        raise ValidationError("dataset", "empty split")
    seqs = [preprocess(s, pre) if pre is not None else s for s, _ in pairs]
    x = batch_features(seqs)
    y = np.array([label for _, label in pairs], dtype=np.int64)
    return x, y


def _rng_state_doc(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def _rng_from_state(doc: dict) -> np.random.Generator:
    rng = np.random.default_rng(0)
    rng.bit_generator.state = doc
    return rng


def predict_kclass(net: StgcnNetwork, x: np.ndarray, batch_size: int) -> np.ndarray:
    preds = []
    for i in range(0, x.shape[0], batch_size):
        logits = net.forward(x[i:i + batch_size], training=False)
        preds.append(logits.data.argmax(axis=1))
    return np.concatenate(preds)


def predict_ordinal(net: StgcnNetwork, x: np.ndarray, batch_size: int) -> np.ndarray:
    preds = []
    for i in range(0, x.shape[0], batch_size):
        logits = net.forward(x[i:i + batch_size], training=False)
        preds.append(decode_batch(ad.sigmoid(logits.data.astype(np.float64))))
    return np.concatenate(preds)


def _accuracy(pred: np.ndarray, y: np.ndarray) -> float:
    return float((pred == y).mean())


def _mae(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.abs(pred.astype(np.float64) - y).mean())


# ---------------------------------------------------------------------------
# phase 1: K-class backbone

def fit_kclass(net: StgcnNetwork, train_x, train_y, val_x, val_y,
               cfg: TrainConfig, log: MetricsLog | None = None,
               resume: dict | None = None, stop_epoch: int | None = None):
    """Train the K-class network; returns (TrainResult, resume payload).

    `resume` is the payload produced by a previous call's return value
    (optimizer, rng state, epoch counters, best snapshot); passing it
    continues the run exactly where it stopped.
    """
    cfg.validate()
    n = train_x.shape[0]
    if n == 0 or val_x.shape[0] == 0:
        raise ValidationError("dataset", "empty split")
    params = net.trainable_params()

    if resume is None:
        opt = adam_state_for(params)
        rng = np.random.default_rng(cfg.seed)
        start_epoch = 0
        best_acc, best_epoch = -1.0, -1
        best_arrays = {k: np.array(v, copy=True) for k, v in net.state_arrays().items()}
    else:
        opt = resume["optimizer"]
        rng = _rng_from_state(resume["rng_state"])
        start_epoch = resume["next_epoch"]
        best_acc = resume["best_val_accuracy"]
        best_epoch = resume["best_epoch"]
        best_arrays = resume["best_arrays"]

    end_epoch = cfg.epochs if stop_epoch is None else min(stop_epoch, cfg.epochs)
    val_acc = best_acc if best_epoch >= 0 else 0.0
    for epoch in range(start_epoch, end_epoch):
        t0 = time.perf_counter()
        lr = lr_at(epoch, cfg)
        perm = rng.permutation(n)
        loss_sum = 0.0
        for i in range(0, n, cfg.batch_size):
            idx = perm[i:i + cfg.batch_size]
            logits = net.forward(train_x[idx], training=True, rng=rng)
            loss = ad.softmax_cross_entropy(logits, train_y[idx])
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                raise DivergenceError(
                    f"loss diverged at epoch {epoch}, batch {i // cfg.batch_size}")
            zero_grads(params)
            loss.backward()
            adam_step(params, opt, lr)
            loss_sum += loss_val * len(idx)
        train_loss = loss_sum / n

        evaluated = ((epoch + 1) % cfg.eval_every == 0) or (epoch == end_epoch - 1)
        if evaluated:
            val_acc = _accuracy(predict_kclass(net, val_x, cfg.batch_size), val_y)
            if val_acc > best_acc:
                best_acc = val_acc
                best_epoch = epoch
                best_arrays = {k: np.array(v, copy=True)
                               for k, v in net.state_arrays().items()}
        wall_ms = int(round((time.perf_counter() - t0) * 1000)) if cfg.log_timing else 0
        if log is not None:
            log.write({"epoch": epoch, "lr": lr, "train_loss": train_loss,
                       "val_accuracy": val_acc if evaluated else None,
                       "wall_ms": wall_ms})

    resume_payload = {
        "optimizer": opt,
        "rng_state": _rng_state_doc(rng),
        "next_epoch": end_epoch,
        "best_val_accuracy": best_acc,
        "best_epoch": best_epoch,
        "best_arrays": best_arrays,
    }
    best_net = _restored(net, best_arrays)
    val_mae = _mae(predict_kclass(best_net, val_x, cfg.batch_size), val_y)
    result = TrainResult(net, best_acc, best_epoch, best_arrays, val_mae,
                         list(log.records) if log else [])
    return result, resume_payload


def _restored(net: StgcnNetwork, arrays: dict) -> StgcnNetwork:
    clone = StgcnNetwork(net.graph, net.layer_specs, net.k, net.head_mode,
                         seed=net.seed, in_channels=net.in_channels,
                         dtype=net.dtype)
    clone.load_state_arrays(arrays)
    return clone


# ---------------------------------------------------------------------------
# phase 2: frozen backbone, binary heads

def fit_ordinal_heads(base_net: StgcnNetwork, train_x, train_y, val_x, val_y,
                      cfg: TrainConfig, log: MetricsLog | None = None):
    """Attach and train K-1 binary heads on cached pooled features."""
    cfg.validate()
    if train_x.shape[0] == 0 or val_x.shape[0] == 0:
        raise ValidationError("dataset", "empty split")
    net = with_binary_heads(base_net, seed=cfg.seed)
    params = net.trainable_params()  # heads only; backbone frozen

    # the backbone is frozen, so its pooled output per sample is constant
    pooled_train = _pooled(net, train_x, cfg.batch_size)
    pooled_val = _pooled(net, val_x, cfg.batch_size)
    targets = binary_targets(train_y, net.k)

    opt = adam_state_for(params)
    rng = np.random.default_rng(cfg.seed)
    n = pooled_train.shape[0]
    best_acc, best_epoch = -1.0, -1
    best_heads = _head_snapshot(net)
    val_acc = 0.0
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        lr = lr_at(epoch, cfg)
        perm = rng.permutation(n)
        loss_sum = 0.0
        for i in range(0, n, cfg.batch_size):
            idx = perm[i:i + cfg.batch_size]
            logits = net.head_logits(Tensor(pooled_train[idx]))
            loss = ad.sigmoid_bce(logits, targets[idx])
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                raise DivergenceError(
                    f"loss diverged at epoch {epoch}, batch {i // cfg.batch_size}")
            zero_grads(params)
            loss.backward()
            adam_step(params, opt, lr)
            loss_sum += loss_val * len(idx)
        train_loss = loss_sum / n

        evaluated = ((epoch + 1) % cfg.eval_every == 0) or (epoch == cfg.epochs - 1)
        if evaluated:
            logits = net.head_logits(Tensor(pooled_val)).data.astype(np.float64)
            pred = decode_batch(ad.sigmoid(logits))
            val_acc = _accuracy(pred, val_y)
            if val_acc > best_acc:
                best_acc = val_acc
                best_epoch = epoch
                best_heads = _head_snapshot(net)
        wall_ms = int(round((time.perf_counter() - t0) * 1000)) if cfg.log_timing else 0
        if log is not None:
            log.write({"epoch": epoch, "lr": lr, "train_loss": train_loss,
                       "val_accuracy": val_acc if evaluated else None,
                       "wall_ms": wall_ms})

    for name, arr in best_heads.items():
        net.params[name].data = np.array(arr, copy=True)
    logits = net.head_logits(Tensor(pooled_val)).data.astype(np.float64)
    pred = decode_batch(ad.sigmoid(logits))
    val_mae = _mae(pred, val_y)
    best_arrays = {k: np.array(v, copy=True) for k, v in net.state_arrays().items()}
    return TrainResult(net, best_acc, best_epoch, best_arrays, val_mae,
                       list(log.records) if log else [])


def _pooled(net: StgcnNetwork, x: np.ndarray, batch_size: int) -> np.ndarray:
    out = []
    for i in range(0, x.shape[0], batch_size):
        _, fmap = net.forward(x[i:i + batch_size], training=False, want_map=True)
        out.append(fmap.data.mean(axis=(2, 3)))
    return np.concatenate(out).astype(np.float32)


def _head_snapshot(net: StgcnNetwork) -> dict:
    return {name: np.array(net.params[name].data, copy=True)
            for name in net.head_param_names()}


# ---------------------------------------------------------------------------
# manifest-level entry points

def train_base(manifest: DatasetManifest, graph: FaceGraphSpec, cfg: TrainConfig,
               *, k: int, base_dir=None, pre: PreprocessConfig | None = None,
               log_path=None, log_append: bool = False,
               ckpt_path=None, resume_path=None, save_resume_path=None,
               stop_epoch: int | None = None, run_config: dict | None = None,
               **net_kwargs):
    """Load splits, train the K-class model, write checkpoint artifacts."""
    train_x, train_y = stack_dataset(load_split_sequences(manifest, "train", base_dir), pre)
    val_x, val_y = stack_dataset(load_split_sequences(manifest, "val", base_dir), pre)

    resume = None
    if resume_path is not None:
        net, meta, opt, records = load_checkpoint(resume_path, graph, expect_k=k,
                                                  expect_head_mode=HEAD_KCLASS)
        resume = {
            "optimizer": opt,
            "rng_state": meta["rng_state"],
            "next_epoch": meta["next_epoch"],
            "best_val_accuracy": meta["best_val_accuracy"],
            "best_epoch": meta["best_epoch"],
            "best_arrays": {name[len("best."):]: arr for name, arr in records.items()
                            if name.startswith("best.")},
        }
    else:
        net = build_network(graph, k, HEAD_KCLASS, seed=cfg.seed, **net_kwargs)

    log = MetricsLog(log_path, append=log_append)
    try:
        result, payload = fit_kclass(net, train_x, train_y, val_x, val_y, cfg,
                                     log, resume, stop_epoch)
    finally:
        log.close()

    meta = {"best_val_accuracy": result.best_val_accuracy,
            "best_epoch": result.best_epoch,
            "val_mae": result.val_mae,
            "config": run_config if run_config is not None else asdict(cfg)}
    if ckpt_path is not None:
        best_net = _restored(net, result.best_arrays)
        save_checkpoint(best_net, ckpt_path, meta=meta)
    if save_resume_path is not None:
        resume_meta = dict(meta)
        resume_meta.update({"rng_state": payload["rng_state"],
                            "next_epoch": payload["next_epoch"],
                            "best_epoch": payload["best_epoch"],
                            "best_val_accuracy": payload["best_val_accuracy"]})
        save_checkpoint(net, save_resume_path, meta=resume_meta,
                        optimizer=payload["optimizer"],
                        extra_arrays={f"best.{name}": arr
                                      for name, arr in payload["best_arrays"].items()})
    return result


def train_ordinal_heads(base_ckpt_path, manifest: DatasetManifest,
                        graph: FaceGraphSpec, cfg: TrainConfig, *,
                        base_dir=None, pre: PreprocessConfig | None = None,
                        log_path=None, ckpt_path=None,
                        run_config: dict | None = None):
    """Phase-2 training from a phase-1 checkpoint; writes the ordinal model."""
    base_net, _, _, _ = load_checkpoint(base_ckpt_path, graph,
                                        expect_head_mode=HEAD_KCLASS)
    train_x, train_y = stack_dataset(load_split_sequences(manifest, "train", base_dir), pre)
    val_x, val_y = stack_dataset(load_split_sequences(manifest, "val", base_dir), pre)

    log = MetricsLog(log_path)
    try:
        result = fit_ordinal_heads(base_net, train_x, train_y, val_x, val_y, cfg, log)
    finally:
        log.close()

    if ckpt_path is not None:
        meta = {"best_val_accuracy": result.best_val_accuracy,
                "best_epoch": result.best_epoch,
                "val_mae": result.val_mae,
                "config": run_config if run_config is not None else asdict(cfg)}
        save_checkpoint(result.net, ckpt_path, meta=meta)
    return result
