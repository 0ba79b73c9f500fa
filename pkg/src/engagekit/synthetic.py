"""Synthetic labeled landmark sequences.

Sequences are produced by deforming the canonical template with two
class-dependent signals plus i.i.d. Gaussian jitter:

* head yaw: rigid rotation about the vertical axis through the face
  center, angle A_k * sin(2*pi*t / (period_s * fps)) with amplitude
  A_k = (K-1-k) * yaw_amp_step; the least engaged class swings widest.
* eyelid closure: eye-contour and iris points are pulled toward the
  line joining the eye corners by factor (K-1-k)/(K-1) * closure_max,
  so lower classes have the most closed eyes.

Class k therefore encodes "engagement": class K-1 is the stillest,
most open-eyed face.  Labels are assigned round-robin over classes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .landmarks import EYE_CONTOUR, LEFT_EYE, LEFT_IRIS, RIGHT_EYE, RIGHT_IRIS, LandmarkSequence
from .facegraph import template_points
from .errors import ValidationError


@dataclass(frozen=True)
class SynthParams:
    """Deformation magnitudes; defaults give well-separated classes."""

    yaw_amp_step: float = 0.15   # radians per class step
    closure_max: float = 0.8     # lid closure fraction for class 0
    noise_sd: float = 0.005      # Gaussian jitter per coordinate
    period_s: float = 2.0        # yaw oscillation period, seconds


def template_depth(points: np.ndarray) -> np.ndarray:
    """Deterministic z profile for the flat template.

    A smooth bump centered on the nose region pushes the face center
    forward so that yaw rotation displaces x in a node-dependent way.
    """
    x, y = points[:, 0], points[:, 1]
    return 0.15 * np.exp(-((x - 0.5) ** 2 + (y - 0.46) ** 2) / 0.05)


def _eye_corner_line_y(points: np.ndarray, eye: tuple) -> float:
    # corners are the first and fourth contour points of each eye
    return float((points[eye[0], 1] + points[eye[3], 1]) / 2.0)


def generate_sequence(label: int, class_count: int, length: int, fps: float,
                      rng: np.random.Generator,
                      params: SynthParams = SynthParams()) -> np.ndarray:
    """One (T, 78, 3) float32 coordinate array for the given class."""
    base = template_points()
    n = base.shape[0]
    z0 = template_depth(base)

    # class-independent geometry with class-dependent lid closure
    closure = 0.0
    if class_count > 1:
        closure = (class_count - 1 - label) / (class_count - 1) * params.closure_max
    closed = base.copy()
    for eye in (LEFT_EYE, RIGHT_EYE):
        line_y = _eye_corner_line_y(base, eye)
        for i in eye:
            closed[i, 1] += closure * (line_y - closed[i, 1])
    for iris in (LEFT_IRIS, RIGHT_IRIS):
        eye = LEFT_EYE if iris is LEFT_IRIS else RIGHT_EYE
        line_y = _eye_corner_line_y(base, eye)
        for i in iris:
            closed[i, 1] += closure * (line_y - closed[i, 1])

    amp = (class_count - 1 - label) * params.yaw_amp_step
    t_idx = np.arange(length, dtype=np.float64)
    theta = amp * np.sin(2.0 * np.pi * t_idx / (params.period_s * fps))

    xc = closed[:, 0] - 0.5
    frames = np.empty((length, n, 3), dtype=np.float64)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    for t in range(length):
        frames[t, :, 0] = 0.5 + xc * cos_t[t] + z0 * sin_t[t]
        frames[t, :, 1] = closed[:, 1]
        frames[t, :, 2] = -xc * sin_t[t] + z0 * cos_t[t]
    frames += rng.normal(0.0, params.noise_sd, size=frames.shape)
    return frames.astype(np.float32)


def generate_synthetic(count: int, class_count: int = 4, length: int = 128,
                       seed: int = 0, fps: float = 30.0,
                       params: SynthParams = SynthParams()) -> list[LandmarkSequence]:
    """Round-robin labeled sequences; fully determined by the arguments."""
    if count < 1:
        raise ValidationError("count", f"must be positive, got {count}")
    if class_count < 2:
        raise ValidationError("class_count", f"need at least 2 classes, got {class_count}")
    if length < 1:
        raise ValidationError("length", f"must be positive, got {length}")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        label = i % class_count
        frames = generate_sequence(label, class_count, length, fps, rng, params)
        out.append(LandmarkSequence(
            sample_id=f"synth-{i:05d}",
            frames=frames,
            validity=np.ones(length, dtype=bool),
            label=label,
            fps=fps,
            class_count=class_count,
        ))
    return out


__all__ = ["SynthParams", "generate_synthetic", "generate_sequence",
           "template_depth", "EYE_CONTOUR"]
