"""Operation handlers behind both the HTTP service and the CLI.

Each handler takes a validated request model and returns a response
model; the CLI invokes these in-process, the FastAPI app over HTTP.
File outputs are written atomically (temp file + rename), except the
training metrics log, which is appended line-by-line during the run so
progress survives interruption.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..config import RunConfig, parse_run_config, resolved_doc
from ..errors import ConfigError, ValidationError
from ..checkpoint import load_checkpoint
from ..facegraph import face_graph, graph_export_payload
from ..flmk import read_sequence, write_sequence
from ..gradcam import grad_cam, saliency_payload
from ..landmarks import PreprocessConfig, preprocess, batch_features
from ..manifest import (DatasetManifest, ManifestEntry, load_manifest,
                        load_split_sequences, save_manifest)
from ..metrics import evaluation_report
from ..model import HEAD_KCLASS
from ..ordinal import decode_ordinal
from ..synthetic import generate_synthetic
from ..train import (TrainConfig, predict_kclass, predict_ordinal,
                     stack_dataset, train_base, train_ordinal_heads)
from .schemas import (EvalRequest, EvalResponse, ExplainRequest,
                      ExplainResponse, GraphResponse, InferRequest,
                      InferResponse, SynthRequest, SynthResponse,
                      TrainOrdinalRequest, TrainRequest, TrainResponse)


def write_json_atomic(path, doc: dict):
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".",
                               prefix=".json-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            json.dump(doc, f, sort_keys=True, indent=1)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def graph_export() -> GraphResponse:
    return GraphResponse(**graph_export_payload())


def synth(req: SynthRequest) -> SynthResponse:
    out_dir = Path(req.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seqs = generate_synthetic(req.samples, req.classes, req.frames,
                              seed=req.seed, fps=req.fps)
    # stratified deterministic split: within each class, leading samples
    # train, then val, then test
    by_class: dict = {}
    for s in seqs:
        by_class.setdefault(s.label, []).append(s)
    split_of: dict = {}
    for label, group in by_class.items():
        m = len(group)
        n_test = int(round(req.test_fraction * m))
        n_val = int(round(req.val_fraction * m))
        n_train = m - n_val - n_test
        if n_train < 1:
            raise ConfigError([f"class {label}: no training samples left "
                               f"after val/test fractions"])
        for i, s in enumerate(group):
            split_of[s.sample_id] = ("train" if i < n_train
                                     else "val" if i < n_train + n_val
                                     else "test")
    entries = []
    counts = {"train": 0, "val": 0, "test": 0}
    for s in seqs:
        name = f"{s.sample_id}.flmk"
        write_sequence(s, out_dir / name)
        tag = split_of[s.sample_id]
        counts[tag] += 1
        entries.append(ManifestEntry(path=name, label=s.label, split=tag))
    manifest = DatasetManifest(entries=entries, class_count=req.classes)
    manifest_path = out_dir / "manifest.jsonl"
    save_manifest(manifest, manifest_path)
    return SynthResponse(written=len(seqs), manifest_path=str(manifest_path),
                         split_counts={k: v for k, v in counts.items() if v})


def _pre_from_data_section(data: dict) -> PreprocessConfig | None:
    pre = PreprocessConfig(frame_stride=data.get("frame_stride", 1),
                           drop_z=data.get("drop_z", False),
                           target_T=data.get("target_T"))
    if pre.frame_stride == 1 and not pre.drop_z and pre.target_T is None:
        return None
    return pre


def _load_manifest_for(cfg: RunConfig):
    if cfg.data.manifest is None:
        raise ConfigError(["data.manifest is required"])
    manifest_path = Path(cfg.data.manifest)
    manifest = load_manifest(manifest_path)
    return manifest, manifest_path.parent


def _train_cfg(cfg: RunConfig) -> TrainConfig:
    t = cfg.train
    return TrainConfig(batch_size=t.batch_size, base_lr=t.base_lr,
                       epochs=t.epochs, lr_decay=t.decay,
                       decay_every=t.decay_every, seed=t.seed,
                       eval_every=t.eval_every, log_timing=t.log_timing)


def train(req: TrainRequest) -> TrainResponse:
    cfg = parse_run_config(req.config)
    if cfg.model.head_mode != HEAD_KCLASS:
        raise ConfigError(["model.head_mode: phase-1 training uses the K-class "
                           "head; binary heads are attached by train-ordinal"])
    manifest, base_dir = _load_manifest_for(cfg)
    out_dir = Path(cfg.paths.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "model.stgc"
    log_path = out_dir / "metrics.jsonl"
    result = train_base(
        manifest, face_graph(), _train_cfg(cfg),
        k=cfg.model.K, base_dir=base_dir,
        pre=_pre_from_data_section(cfg.data.model_dump()),
        log_path=log_path, log_append=req.resume_from is not None,
        ckpt_path=ckpt_path,
        resume_path=req.resume_from, save_resume_path=req.save_resume_to,
        stop_epoch=req.stop_epoch, run_config=resolved_doc(cfg),
        channels=tuple(cfg.model.channels), gamma=cfg.model.temporal_kernel,
        dropout=cfg.model.dropout,
        strides=tuple(cfg.model.strides) if cfg.model.strides else None)
    return TrainResponse(checkpoint_path=str(ckpt_path), log_path=str(log_path),
                         best_val_accuracy=result.best_val_accuracy,
                         best_epoch=result.best_epoch, val_mae=result.val_mae,
                         epochs_run=len(result.records))


def train_ordinal(req: TrainOrdinalRequest) -> TrainResponse:
    cfg = parse_run_config(req.config)
    manifest, base_dir = _load_manifest_for(cfg)
    out_dir = Path(cfg.paths.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "model_ordinal.stgc"
    log_path = out_dir / "metrics_ordinal.jsonl"
    result = train_ordinal_heads(
        req.base_checkpoint, manifest, face_graph(), _train_cfg(cfg),
        base_dir=base_dir, pre=_pre_from_data_section(cfg.data.model_dump()),
        log_path=log_path, ckpt_path=ckpt_path, run_config=resolved_doc(cfg))
    return TrainResponse(checkpoint_path=str(ckpt_path), log_path=str(log_path),
                         best_val_accuracy=result.best_val_accuracy,
                         best_epoch=result.best_epoch, val_mae=result.val_mae,
                         epochs_run=len(result.records))


def _load_net_and_pre(ckpt_path):
    net, meta, _, _ = load_checkpoint(ckpt_path, face_graph())
    pre = None
    if meta and isinstance(meta.get("config"), dict):
        pre = _pre_from_data_section(meta["config"].get("data", {}))
    return net, pre, meta


def evaluate(req: EvalRequest) -> EvalResponse:
    net, pre, _ = _load_net_and_pre(req.checkpoint)
    manifest = load_manifest(req.manifest)
    pairs = load_split_sequences(manifest, req.split, Path(req.manifest).parent)
    x, y = stack_dataset(pairs, pre)
    if net.head_mode == HEAD_KCLASS:
        pred = predict_kclass(net, x, 16)
        scores = None
        if net.k == 2:
            probs = []
            for i in range(0, x.shape[0], 16):
                logits = net.forward(x[i:i + 16], training=False)
                probs.append(ad.softmax_probs(logits.data.astype(np.float64))[:, 1])
            scores = np.concatenate(probs)
    else:
        pred = predict_ordinal(net, x, 16)
        scores = None
        if net.k == 2:
            probs = []
            for i in range(0, x.shape[0], 16):
                logits = net.forward(x[i:i + 16], training=False)
                probs.append(ad.sigmoid(logits.data.astype(np.float64))[:, 0])
            scores = np.concatenate(probs)
    report = evaluation_report(y, pred, net.k, scores)
    return EvalResponse(**report)


def infer(req: InferRequest) -> InferResponse:
    net, pre, _ = _load_net_and_pre(req.checkpoint)
    seq = read_sequence(req.sample)
    if pre is not None:
        seq = preprocess(seq, pre)
    x = batch_features([seq])
    logits = net.forward(x, training=False).data.astype(np.float64)[0]
    if net.head_mode == HEAD_KCLASS:
        probs = ad.softmax_probs(logits)
        predicted = int(np.argmax(probs))
    else:
        decoded = decode_ordinal(ad.sigmoid(logits))
        probs = decoded.probabilities
        predicted = decoded.predicted
    return InferResponse(sample_id=seq.sample_id, predicted_class=predicted,
                         probabilities=[float(p) for p in probs],
                         head_mode=net.head_mode)


def explain(req: ExplainRequest) -> ExplainResponse:
    net, pre, _ = _load_net_and_pre(req.checkpoint)
    seq = read_sequence(req.sample)
    if pre is not None:
        seq = preprocess(seq, pre)
    x = batch_features([seq])
    sal = grad_cam(net, x, req.target_class, sample_id=seq.sample_id)
    doc = saliency_payload(sal)
    points = None
    if req.with_points:
        # per-frame point cloud: node x, y plus saliency; temporal strides
        # shrink the map, so each map row uses its nearest input frame
        t_map, t_in = sal.values.shape[0], seq.length
        points = []
        for t in range(t_map):
            src = min(t * t_in // t_map, t_in - 1)
            for n in range(seq.frames.shape[1]):
                points.append([float(seq.frames[src, n, 0]),
                               float(seq.frames[src, n, 1]),
                               float(sal.values[t, n])])
    return ExplainResponse(sample_id=doc["sample_id"],
                           target_class=doc["target_class"],
                           frames=doc["frames"], nodes=doc["nodes"],
                           values=doc["values"], points=points)
