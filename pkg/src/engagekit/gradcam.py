"""Saliency over the last graph-temporal layer (gradient-weighted CAM).

For a target class, channel weights are the mean gradient of the target
logit over the last layer's map; the saliency is the rectified
channel-weighted sum, max-normalized to [0, 1].  For binary-heads
models class k >= 1 maps to the "y > k-1" head logit and class 0 to the
negated "y > 0" logit (the model has no direct class-0 logit).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import HEAD_KCLASS, StgcnNetwork


@dataclass(frozen=True)
class SaliencyMap:
    values: np.ndarray  # (T', N) in [0, 1]; T' is the feature-map length
    target_class: int
    sample_id: str


def grad_cam(net: StgcnNetwork, features: np.ndarray, target_class: int,
             sample_id: str = "") -> SaliencyMap:
    """features is a single sample (3, T, N) or batch of one (1, 3, T, N)."""
    x = np.asarray(features)
    if x.ndim == 3:
        x = x[None]
    if x.shape[0] != 1:
        raise ValidationError("features", "saliency runs on a single sample")
    if not 0 <= target_class < net.k:
        raise ValidationError("target_class",
                              f"class {target_class} out of range for K={net.k}")

    logits, fmap = net.forward(x, training=False, want_map=True)
    seed = np.zeros_like(logits.data)
    if net.head_mode == HEAD_KCLASS:
        seed[0, target_class] = 1.0
    else:
        if target_class >= 1:
            seed[0, target_class - 1] = 1.0
        else:
            seed[0, 0] = -1.0
    logits.backward(seed=seed)

    grad = fmap.grad
    if grad is None:
        grad = np.zeros_like(fmap.data)
    f = fmap.data[0].astype(np.float64)      # (C', T', N)
    g = grad[0].astype(np.float64)
    alpha = g.mean(axis=(1, 2))              # per-channel weight
    raw = np.maximum(0.0, np.tensordot(alpha, f, axes=(0, 0)))  # (T', N)
    peak = raw.max()
    values = raw / peak if peak > 0 else raw
    return SaliencyMap(values, target_class, sample_id)


def saliency_payload(sal: SaliencyMap) -> dict:
    """JSON document: sample, class, shape, row-major values."""
    t, n = sal.values.shape
    return {
        "sample_id": sal.sample_id,
        "target_class": sal.target_class,
        "frames": int(t),
        "nodes": int(n),
        "values": [float(v) for v in sal.values.reshape(-1)],
    }
