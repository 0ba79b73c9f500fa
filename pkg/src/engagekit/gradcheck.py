"""Central-difference verification of analytic gradients.

The loss callable must be deterministic (eval-mode dropout or a fixed
mask) and should be evaluated in float64; float32 round-off is larger
than the 1e-4 tolerance this check is used with.  Coordinates are
sampled per parameter; callers avoid placing any ReLU pre-activation at
exactly zero, where the derivative is undefined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .optim import zero_grads


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict
    samples: int

    def ok(self, tolerance: float = 1e-4) -> bool:
        return self.max_rel_error < tolerance


def relative_error(ga: float, gf: float) -> float:
    return abs(ga - gf) / max(abs(ga), abs(gf), 1e-8)


def grad_check(loss_fn, params: dict, samples_per_param: int = 5,
               h: float = 1e-5, seed: int = 0, exclude=()) -> GradCheckReport:
    """Compare backward() gradients against central differences.

    loss_fn() -> scalar Tensor, rebuilt from the current values of
    `params` (name -> Tensor) on every call.  Names in `exclude` are
    skipped: use it for parameters whose true gradient is exactly zero
    (e.g. a projection bias directly feeding train-mode batch norm),
    where the finite-difference side is pure round-off noise; assert
    their analytic gradient is ~0 directly instead.
    """
    params = {n: p for n, p in params.items() if n not in set(exclude)}
    zero_grads(params)
    loss = loss_fn()
    loss.backward()
    analytic = {name: (np.array(p.grad, copy=True) if p.grad is not None
                       else np.zeros_like(p.data))
                for name, p in params.items()}

    rng = np.random.default_rng(seed)
    per_param = {}
    total = 0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        count = min(samples_per_param, flat.size)
        idx = rng.choice(flat.size, size=count, replace=False)
        worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            lp = float(loss_fn().data)
            flat[i] = orig - h
            lm = float(loss_fn().data)
            flat[i] = orig
            gf = (lp - lm) / (2.0 * h)
            ga = float(analytic[name].reshape(-1)[i])
            worst = max(worst, relative_error(ga, gf))
            total += 1
        per_param[name] = worst
    max_err = max(per_param.values()) if per_param else 0.0
    return GradCheckReport(max_err, per_param, total)
