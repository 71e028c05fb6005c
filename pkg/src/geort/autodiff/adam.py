"""Adam optimizer with bias correction, updating parameter arrays in place."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, TrainingDivergenceError


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params, learning_rate: float = 1e-3, **kw) -> "AdamState":
        arrays = [getattr(p, "data", p) for p in params]
        state = cls(learning_rate=learning_rate, **kw)
        state.m = [np.zeros_like(p) for p in arrays]
        state.v = [np.zeros_like(p) for p in arrays]
        return state


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray | None]
) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update. Mutates `params` and `state` and returns both.

    A missing gradient (None) is treated as zero. Non-finite gradients abort
    with a divergence error; the caller knows which loss produced them.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params/grads/state length mismatch")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t
    lr = state.learning_rate
    for i, (p, g) in enumerate(zip(params, grads)):
        m, v = state.m[i], state.v[i]
        if g is None:
            m *= b1
            v *= b2
            continue
        if g.shape != p.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError("non-finite gradient in Adam update")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
    return params, state
