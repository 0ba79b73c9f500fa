"""Engagement classification from facial landmark sequences.

Core pipeline: landmark sequences (FLMK files) -> fixed face graph ->
graph-temporal network -> K-class or ordinal engagement predictions,
with training, evaluation, and saliency tooling on top.

Submodule imports are deferred (PEP 562) so that importing the package
for its CLI does not pull in numpy before thread-cap environment
variables are applied.
"""

from __future__ import annotations

import importlib

__version__ = "0.1.0"

# public name -> defining submodule
_EXPORTS = {
    "ConfigError": "errors",
    "DegeneracyError": "errors",
    "DivergenceError": "errors",
    "EngageError": "errors",
    "FingerprintMismatchError": "errors",
    "FormatError": "errors",
    "ShapeError": "errors",
    "UndefinedMetricError": "errors",
    "ValidationError": "errors",
    "LandmarkSequence": "landmarks",
    "PreprocessConfig": "landmarks",
    "preprocess": "landmarks",
    "batch_features": "landmarks",
    "read_sequence": "flmk",
    "write_sequence": "flmk",
    "DatasetManifest": "manifest",
    "ManifestEntry": "manifest",
    "load_manifest": "manifest",
    "save_manifest": "manifest",
    "FaceGraphSpec": "facegraph",
    "delaunay_triangulate": "facegraph",
    "face_graph": "facegraph",
    "normalize_adjacency": "facegraph",
    "SynthParams": "synthetic",
    "generate_synthetic": "synthetic",
    "LayerSpec": "model",
    "StgcnNetwork": "model",
    "build_network": "model",
    "load_checkpoint": "checkpoint",
    "save_checkpoint": "checkpoint",
    "binarize_labels": "ordinal",
    "decode_ordinal": "ordinal",
    "make_ordinal": "ordinal",
    "TrainConfig": "train",
    "lr_at": "train",
    "train_base": "train",
    "train_ordinal_heads": "train",
    "accuracy": "metrics",
    "auc_pr": "metrics",
    "auc_roc": "metrics",
    "confusion": "metrics",
    "evaluation_report": "metrics",
    "mae": "metrics",
    "SaliencyMap": "gradcam",
    "grad_cam": "gradcam",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    try:
        module_name = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    value = getattr(importlib.import_module(f".{module_name}", __name__), name)
    globals()[name] = value  # cache for later lookups
    return value


def __dir__():
    return __all__
