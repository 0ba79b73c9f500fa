"""Request/response models shared by the HTTP service and the CLI."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GraphResponse(StrictModel):
    node_count: int
    edges: list[list[int]]
    template: list[list[float]]


class SynthRequest(StrictModel):
    out_dir: str
    samples: int = Field(default=1000, ge=1)
    classes: int = Field(default=4, ge=2)
    frames: int = Field(default=128, ge=1)
    seed: int = 0
    fps: float = Field(default=30.0, gt=0)
    val_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)
    test_fraction: float = Field(default=0.0, ge=0.0, lt=1.0)


class SynthResponse(StrictModel):
    written: int
    manifest_path: str
    split_counts: dict[str, int]


class TrainRequest(StrictModel):
    config: dict
    resume_from: str | None = None
    save_resume_to: str | None = None
    stop_epoch: int | None = None


class TrainOrdinalRequest(StrictModel):
    config: dict
    base_checkpoint: str


class TrainResponse(StrictModel):
    checkpoint_path: str
    log_path: str
    best_val_accuracy: float
    best_epoch: int
    val_mae: float
    epochs_run: int


class EvalRequest(StrictModel):
    checkpoint: str
    manifest: str
    split: str = "val"


class EvalResponse(StrictModel):
    accuracy: float
    mae: float
    confusion: list[list[int]]
    count: int
    auc_roc: float | None = None
    auc_pr: float | None = None


class InferRequest(StrictModel):
    checkpoint: str
    sample: str


class InferResponse(StrictModel):
    sample_id: str
    predicted_class: int
    probabilities: list[float]
    head_mode: str


class ExplainRequest(StrictModel):
    checkpoint: str
    sample: str
    target_class: int = Field(ge=0)
    with_points: bool = False


class ExplainResponse(StrictModel):
    sample_id: str
    target_class: int
    frames: int
    nodes: int
    values: list[float]
    points: list[list[float]] | None = None
