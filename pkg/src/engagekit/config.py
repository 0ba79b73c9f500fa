"""Run configuration: one JSON document drives training and evaluation.

Unknown keys are rejected everywhere, and every offending key is
reported at once, so a typo in a nested section cannot silently fall
back to a default.
"""

from __future__ import annotations

import json

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError

from .errors import ConfigError


class DataSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    manifest: str | None = None
    frame_stride: int = Field(default=1, ge=1)
    drop_z: bool = False
    target_T: int | None = Field(default=None, ge=1)


class ModelSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    K: int = Field(default=4, ge=2)
    temporal_kernel: int = Field(default=9, ge=1)
    channels: list[int] = Field(default=[64, 128, 256])
    head_mode: str = Field(default="kclass", pattern="^(kclass|binary_heads)$")
    dropout: float = Field(default=0.1, ge=0.0, lt=1.0)
    strides: list[int] | None = None


class TrainSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    batch_size: int = Field(default=16, ge=1)
    base_lr: float = Field(default=0.001, gt=0)
    epochs: int = Field(default=300, ge=1)
    decay: float = Field(default=0.1, gt=0, le=1)
    decay_every: int = Field(default=100, ge=1)
    seed: int = 0
    eval_every: int = Field(default=1, ge=1)
    log_timing: bool = True


class PathsSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    out_dir: str = "."


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    data: DataSection = Field(default_factory=DataSection)
    model: ModelSection = Field(default_factory=ModelSection)
    train: TrainSection = Field(default_factory=TrainSection)
    paths: PathsSection = Field(default_factory=PathsSection)


def _problems_from(err: PydanticError) -> list:
    problems = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        problems.append(f"{loc}: {e['msg']}")
    return problems


def parse_run_config(doc: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(doc)
    except PydanticError as err:
        raise ConfigError(_problems_from(err)) from err


def load_run_config(path) -> RunConfig:
    try:
        with open(path) as f:
            doc = json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError([f"config file not found: {path}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ConfigError(["config root must be a JSON object"])
    return parse_run_config(doc)


def resolved_doc(cfg: RunConfig) -> dict:
    """Plain dict with every default filled in; embedded into artifacts."""
    return cfg.model_dump()
