"""Landmark-sequence data model and preprocessing.

A sample is a sequence of T frames, each holding N=78 facial landmarks
with 3 coordinates (x, y, z).  x and y are image-normalized and nominally
in [0, 1]; z is relative depth.  Frames where no face was detected are
kept (so T is preserved) with validity False and all-zero coordinates.

Node ordering is fixed: indices 0-67 follow the classic 68-landmark
face-contour convention, 68-72 are the left iris (center first, then 4
boundary points clockwise from the top), 73-77 the right iris likewise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError

NODE_COUNT = 78

# node-index groups referenced by preprocessing and the synthetic generator
JAW = tuple(range(0, 17))
LEFT_EYE = tuple(range(36, 42))
RIGHT_EYE = tuple(range(42, 48))
EYE_CONTOUR = LEFT_EYE + RIGHT_EYE
LEFT_IRIS = tuple(range(68, 73))
RIGHT_IRIS = tuple(range(73, 78))
IRIS = LEFT_IRIS + RIGHT_IRIS


@dataclass
class LandmarkSequence:
    """One sample: (T, N, 3) coordinates, per-frame validity, optional label."""

    sample_id: str
    frames: np.ndarray          # (T, N, 3) float32
    validity: np.ndarray        # (T,) bool
    label: int | None = None
    fps: float = 30.0
    class_count: int | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        self.validity = np.asarray(self.validity, dtype=bool)

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    def validate(self) -> None:
        """Raise ValidationError naming the first offending field."""
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise ValidationError("frames", f"expected (T, N, 3), got {self.frames.shape}")
        t, n, _ = self.frames.shape
        if n != NODE_COUNT:
            raise ValidationError("frames", f"node count must be {NODE_COUNT}, got {n}")
        if t < 1:
            raise ValidationError("frames", "sequence must have at least one frame")
        if self.validity.shape != (t,):
            raise ValidationError("validity", f"expected shape ({t},), got {self.validity.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise ValidationError("frames", "coordinates must be finite")
        invalid = ~self.validity
        if invalid.any() and np.any(self.frames[invalid] != 0.0):
            raise ValidationError("validity", "invalid frames must have all-zero coordinates")
        if self.label is not None:
            if self.label < 0:
                raise ValidationError("label", f"label must be >= 0, got {self.label}")
            if self.class_count is not None and self.label >= self.class_count:
                raise ValidationError(
                    "label", f"label {self.label} out of range for {self.class_count} classes")
        if self.fps <= 0:
            raise ValidationError("fps", f"fps must be positive, got {self.fps}")

    def equals(self, other: "LandmarkSequence") -> bool:
        return (
            self.sample_id == other.sample_id
            and self.label == other.label
            and self.class_count == other.class_count
            and np.float32(self.fps) == np.float32(other.fps)
            and self.frames.shape == other.frames.shape
            and np.array_equal(self.frames, other.frames)
            and np.array_equal(self.validity, other.validity)
        )


@dataclass(frozen=True)
class PreprocessConfig:
    """Frame subsampling and coordinate-channel options.

    frame_stride keeps every n-th frame; drop_z zeroes the z channel (the
    channel stays so the network shape is unchanged); target_T truncates
    or zero-pads (validity False) to a fixed length.
    """

    frame_stride: int = 1
    drop_z: bool = False
    target_T: int | None = None

    def validate(self) -> None:
        if self.frame_stride < 1:
            raise ValidationError("frame_stride", f"must be >= 1, got {self.frame_stride}")
        if self.target_T is not None and self.target_T < 1:
            raise ValidationError("target_T", f"must be >= 1, got {self.target_T}")


def preprocess(seq: LandmarkSequence, cfg: PreprocessConfig) -> LandmarkSequence:
    """Apply stride subsampling, optional z-drop and length adjustment."""
    seq.validate()
    cfg.validate()

    frames = seq.frames[:: cfg.frame_stride].copy()
    validity = seq.validity[:: cfg.frame_stride].copy()

    if cfg.drop_z:
        frames[:, :, 2] = 0.0

    if cfg.target_T is not None:
        t = frames.shape[0]
        if t > cfg.target_T:
            frames = frames[: cfg.target_T]
            validity = validity[: cfg.target_T]
        elif t < cfg.target_T:
            pad = cfg.target_T - t
            frames = np.concatenate(
                [frames, np.zeros((pad, NODE_COUNT, 3), dtype=frames.dtype)])
            validity = np.concatenate([validity, np.zeros(pad, dtype=bool)])

    return replace(seq, frames=frames, validity=validity)


def batch_features(sequences: list[LandmarkSequence]) -> np.ndarray:
    """Stack sequences into a (B, 3, T, N) feature batch.

    All sequences must share the same length; coordinates feed the network
    raw (the input batch-norm layer handles scale).
    """
    if not sequences:
        raise ValidationError("sequences", "batch must not be empty")
    t0 = sequences[0].length
    for s in sequences:
        if s.length != t0:
            raise ValidationError(
                "frames", f"all sequences must share T; got {s.length} != {t0}")
    # (B, T, N, 3) -> (B, 3, T, N)
    stack = np.stack([s.frames for s in sequences])
    return np.ascontiguousarray(stack.transpose(0, 3, 1, 2))
