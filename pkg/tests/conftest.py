"""Shared fixtures and small builders used across the suite."""

from __future__ import annotations

import numpy as np
import pytest

from engagekit.facegraph import build_adjacency
from engagekit.landmarks import NODE_COUNT, LandmarkSequence


def make_sequence(t: int = 12, seed: int = 0, label=None, class_count=None,
                  invalid=(), fps: float = 30.0) -> LandmarkSequence:
    """Random valid sequence; frames listed in `invalid` get zeroed."""
    rng = np.random.default_rng(seed)
    frames = rng.random((t, NODE_COUNT, 3)).astype(np.float32)
    validity = np.ones(t, dtype=bool)
    for i in invalid:
        frames[i] = 0.0
        validity[i] = False
    return LandmarkSequence(sample_id=f"seq-{seed}", frames=frames,
                            validity=validity, label=label, fps=fps,
                            class_count=class_count)


@pytest.fixture
def triangle_graph():
    # K3: every node adjacent to the other two
    return build_adjacency([(0, 1, 2)], 3)


@pytest.fixture
def edge_graph():
    # two nodes, one edge
    from engagekit.facegraph import FaceGraphSpec
    a = np.zeros((2, 2))
    a[0, 1] = a[1, 0] = 1.0
    return FaceGraphSpec(node_count=2, edges=frozenset({(0, 1)}), adjacency=a)


@pytest.fixture(scope="session")
def synth_dataset(tmp_path_factory):
    """Small on-disk 4-class dataset with a manifest, shared by IO tests."""
    from engagekit.service import handlers, schemas
    out = tmp_path_factory.mktemp("dataset")
    resp = handlers.synth(schemas.SynthRequest(
        out_dir=str(out), samples=40, classes=4, frames=32, seed=11,
        val_fraction=0.25))
    return {"dir": out, "manifest": resp.manifest_path, "written": resp.written}
