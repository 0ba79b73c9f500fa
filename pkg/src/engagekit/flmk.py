"""FLMK on-disk container for landmark sequences.

Little-endian layout:

    magic   "FLMK"   4 bytes
    version u16      = 1
    N       u16      node count
    T       u32      frame count
    K       u16      class count (0 = unspecified)
    label   i16      ordinal label, -1 = unlabeled
    fps     f32
    validity T bytes (0/1)
    coords  T*N*3 f32, frame-major, node-major, (x, y, z) order

Writes are byte-deterministic for identical input.  The sample id is not
stored; readers derive it from the file stem, so round-trips are exact
when files are named ``<sample_id>.flmk``.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .landmarks import LandmarkSequence

MAGIC = b"FLMK"
VERSION = 1
_HEADER = struct.Struct("<4sHHIHhf")  # 20 bytes

HEADER_SIZE = _HEADER.size


def file_size_for(t: int, n: int) -> int:
    """Exact byte size of an FLMK file with T frames and N nodes."""
    return HEADER_SIZE + t + t * n * 3 * 4


def write_sequence(seq: LandmarkSequence, path: str | os.PathLike) -> None:
    """Write seq to path atomically (temp file + rename)."""
    seq.validate()
    t, n, _ = seq.frames.shape
    label = -1 if seq.label is None else int(seq.label)
    if not -1 <= label <= 0x7FFF:
        raise ValidationError("label", f"label {label} does not fit i16")
    k = 0 if seq.class_count is None else int(seq.class_count)

    header = _HEADER.pack(MAGIC, VERSION, n, t, k, label, float(seq.fps))
    validity = seq.validity.astype(np.uint8).tobytes()
    coords = np.ascontiguousarray(seq.frames, dtype="<f4").tobytes()

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(validity)
        fh.write(coords)
    os.replace(tmp, path)


def read_sequence(path: str | os.PathLike) -> LandmarkSequence:
    """Read an FLMK file; exact inverse of write_sequence."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read()

    if len(raw) < HEADER_SIZE:
        raise FormatError(FormatError.TRUNCATED,
                          f"{path}: {len(raw)} bytes, header needs {HEADER_SIZE}")
    magic, version, n, t, k, label, fps = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(FormatError.BAD_MAGIC, f"{path}: magic {magic!r}")
    if version != VERSION:
        raise FormatError(FormatError.BAD_VERSION,
                          f"{path}: version {version}, expected {VERSION}")

    expected = file_size_for(t, n)
    if len(raw) < expected:
        raise FormatError(FormatError.TRUNCATED,
                          f"{path}: {len(raw)} bytes, expected {expected}")
    if len(raw) > expected:
        raise FormatError(FormatError.CORRUPT,
                          f"{path}: {len(raw) - expected} trailing bytes")

    validity = np.frombuffer(raw, dtype=np.uint8, count=t, offset=HEADER_SIZE)
    coords = np.frombuffer(raw, dtype="<f4", count=t * n * 3,
                           offset=HEADER_SIZE + t)

    seq = LandmarkSequence(
        sample_id=path.stem,
        frames=coords.reshape(t, n, 3).copy(),
        validity=validity.astype(bool),
        label=None if label < 0 else int(label),
        fps=float(fps),
        class_count=None if k == 0 else int(k),
    )
    seq.validate()
    return seq
