"""Adam optimizer for named parameter tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import ShapeError


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_state_for(params: dict) -> AdamState:
    state = AdamState()
    for name, p in params.items():
        state.m[name] = np.zeros_like(p.data)
        state.v[name] = np.zeros_like(p.data)
    return state


def adam_step(params: dict, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update over `params` (name -> Tensor).

    Only tensors present in `params` are touched; freezing a block means
    not passing it.  A missing gradient counts as zero (moments decay,
    no movement from rest).
    """
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        if name not in state.m:
            raise ShapeError(f"no optimizer state for parameter {name!r}")
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter {p.data.shape}")
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.data.dtype)


def zero_grads(params: dict) -> None:
    for p in params.values():
        p.grad = None


def clone_params(params: dict) -> dict:
    return {name: np.array(p.data, copy=True) for name, p in params.items()}


def serialize_state(state: AdamState) -> dict:
    """Checkpoint-friendly view: arrays stay arrays, scalars go plain."""
    return {
        "step": state.step,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "eps": state.eps,
        "m": dict(state.m),
        "v": dict(state.v),
    }


def restore_state(payload: dict) -> AdamState:
    return AdamState(step=int(payload["step"]),
                     m=dict(payload["m"]), v=dict(payload["v"]),
                     beta1=float(payload["beta1"]),
                     beta2=float(payload["beta2"]),
                     eps=float(payload["eps"]))
