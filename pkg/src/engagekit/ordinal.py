"""Ordinal decomposition: K-class labels as K-1 "is y > i" problems.

A trained K-class network is converted by freezing its backbone and
attaching K-1 single-output heads, one per binary threshold.  Head
probabilities are recombined into class probabilities by telescoping
differences; the raw differences always sum to 1, but can be negative
when heads disagree, so classification runs on the raw values and only
reported probability vectors are clamped and renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .checkpoint import load_checkpoint
from .facegraph import FaceGraphSpec
from .model import HEAD_KCLASS, StgcnNetwork, with_binary_heads


@dataclass(frozen=True)
class BinaryLabelSet:
    """heads[i][j] = 1 iff sample j's label > i; rows are monotone."""

    heads: tuple  # K-1 arrays of shape (n,)
    k: int


@dataclass(frozen=True)
class OrdinalDecode:
    raw: np.ndarray            # telescoped values, sum exactly 1
    probabilities: np.ndarray  # clamped to >= 0 and renormalized
    predicted: int


def binarize_labels(labels, k: int) -> BinaryLabelSet:
    y = np.asarray(labels, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= k):
        raise ValidationError("labels", f"labels must be in [0, {k - 1}]")
    heads = tuple((y > i).astype(np.float32) for i in range(k - 1))
    return BinaryLabelSet(heads, k)


def binary_targets(labels, k: int) -> np.ndarray:
    """(n, K-1) float matrix of the binarized labels, column i = y > i."""
    return np.stack(binarize_labels(labels, k).heads, axis=1)


def decode_raw(binary_probs: np.ndarray) -> np.ndarray:
    """Telescoping recombination; works on (..., K-1) batches."""
    p = np.asarray(binary_probs, dtype=np.float64)
    if p.shape[-1] < 1:
        raise ValidationError("binary_probs", "need at least one threshold")
    if (p < 0).any() or (p > 1).any():
        raise ValidationError("binary_probs", "probabilities must lie in [0, 1]")
    first = 1.0 - p[..., :1]
    middle = p[..., :-1] - p[..., 1:]
    last = p[..., -1:]
    return np.concatenate([first, middle, last], axis=-1)


def decode_ordinal(binary_probs) -> OrdinalDecode:
    """Class distribution and argmax decision from K-1 head probabilities.

    Ties go to the lower class index.  The reported distribution clamps
    negative raw values to zero and renormalizes (the positive mass is
    always >= 1, so the normalizer never vanishes).
    """
    raw = decode_raw(np.asarray(binary_probs).reshape(-1))
    predicted = int(np.argmax(raw))
    clamped = np.maximum(raw, 0.0)
    probabilities = clamped / clamped.sum()
    return OrdinalDecode(raw, probabilities, predicted)


def decode_batch(binary_probs: np.ndarray) -> np.ndarray:
    """(B, K-1) head probabilities -> (B,) predicted classes."""
    raw = decode_raw(binary_probs)
    return raw.argmax(axis=-1)


def make_ordinal(base_checkpoint_path, graph: FaceGraphSpec, seed: int,
                 expect_k: int | None = None) -> StgcnNetwork:
    """Frozen-backbone binary-heads network from a trained K-class model."""
    net, _, _, _ = load_checkpoint(base_checkpoint_path, graph,
                                   expect_k=expect_k,
                                   expect_head_mode=HEAD_KCLASS)
    return with_binary_heads(net, seed)
