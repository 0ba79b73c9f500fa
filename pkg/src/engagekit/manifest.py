"""Dataset manifests: JSON Lines, one {path, label, split} object per sample."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError
from . import flmk

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int
    split: str


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    class_count: int

    def split(self, tag: str) -> list[ManifestEntry]:
        if tag not in SPLITS:
            raise ValidationError("split", f"unknown split {tag!r}")
        return [e for e in self.entries if e.split == tag]

    def validate(self, check_files: bool = True, base_dir: str | None = None) -> None:
        if self.class_count < 2:
            raise ValidationError("class_count", f"need >= 2 classes, got {self.class_count}")
        for e in self.entries:
            if not 0 <= e.label < self.class_count:
                raise ValidationError(
                    "label", f"{e.path}: label {e.label} outside 0..{self.class_count - 1}")
            if e.split not in SPLITS:
                raise ValidationError("split", f"{e.path}: unknown split {e.split!r}")
            if check_files:
                p = resolve_path(e.path, base_dir)
                if not p.is_file():
                    raise ValidationError("path", f"missing sample file {p}")
                flmk.read_sequence(p)  # must parse


def resolve_path(entry_path: str, base_dir: str | None) -> Path:
    p = Path(entry_path)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    return p


def load_manifest(path: str | os.PathLike, class_count: int | None = None,
                  check_files: bool = False) -> DatasetManifest:
    """Load a JSONL manifest.  K defaults to max(label)+1 when not given."""
    path = Path(path)
    entries = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError("manifest", f"{path}:{line_no}: bad JSON ({exc})")
            missing = {"path", "label", "split"} - obj.keys()
            if missing:
                raise ValidationError(
                    "manifest", f"{path}:{line_no}: missing keys {sorted(missing)}")
            entries.append(ManifestEntry(str(obj["path"]), int(obj["label"]), str(obj["split"])))
    if not entries:
        raise ValidationError("manifest", f"{path}: no entries")
    if class_count is None:
        class_count = max(e.label for e in entries) + 1
    mani = DatasetManifest(entries, class_count)
    mani.validate(check_files=check_files, base_dir=str(path.parent))
    return mani


def save_manifest(mani: DatasetManifest, path: str | os.PathLike) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        for e in mani.entries:
            fh.write(json.dumps({"path": e.path, "label": e.label, "split": e.split}) + "\n")
    os.replace(tmp, path)


def load_split_sequences(mani: DatasetManifest, tag: str, base_dir: str | None = None):
    """Read all sequences of one split, pairing each with its label."""
    out = []
    for e in mani.split(tag):
        seq = flmk.read_sequence(resolve_path(e.path, base_dir))
        out.append((seq, e.label))
    return out
