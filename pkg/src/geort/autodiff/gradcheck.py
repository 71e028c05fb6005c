"""Finite-difference gradient verification.

The reference is always a central difference of the scalar loss itself;
the comparison never reuses the tape. Relative error is measured against
max(1, |a|, |b|) so near-zero gradients do not blow up the ratio.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tape import Tensor

LossBuilder = Callable[[list[Tensor]], Tensor]


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _as_arrays(params) -> list[np.ndarray]:
    return [
        (p.data if isinstance(p, Tensor) else np.asarray(p, dtype=np.float64)).copy()
        for p in params
    ]


def autodiff_gradients(build_loss: LossBuilder, params: list[np.ndarray]) -> tuple[float, list[np.ndarray]]:
    """Evaluate the loss once and return (value, gradients per param array)."""
    leaves = [Tensor(p.copy(), requires_grad=True, op="param") for p in params]
    loss = build_loss(leaves)
    loss.backward()
    grads = [
        leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves
    ]
    return loss.item(), grads


def _loss_value(build_loss: LossBuilder, params: list[np.ndarray]) -> float:
    leaves = [Tensor(p, requires_grad=False, op="param") for p in params]
    return build_loss(leaves).item()


def check_gradients(
    build_loss: LossBuilder,
    params: list[np.ndarray],
    rng: np.random.Generator,
    step: float = 1e-5,
    tol: float = 1e-4,
    n_coords: int = 10,
    n_directions: int = 2,
) -> dict:
    """Compare tape gradients against central differences at one parameter point.

    Checks `n_coords` randomly chosen scalar coordinates plus `n_directions`
    random unit directions (directional derivative vs projected gradient).
    Returns a report dict; `report["max_rel_err"] < tol` iff the check passed.
    """
    params = _as_arrays(params)
    _, grads = autodiff_gradients(build_loss, params)

    worst = 0.0
    checks = 0

    flat_sizes = [p.size for p in params]
    total = sum(flat_sizes)
    for _ in range(n_coords):
        k = int(rng.integers(total))
        pi = 0
        while k >= flat_sizes[pi]:
            k -= flat_sizes[pi]
            pi += 1
        idx = np.unravel_index(k, params[pi].shape)
        orig = params[pi][idx]
        params[pi][idx] = orig + step
        f_plus = _loss_value(build_loss, params)
        params[pi][idx] = orig - step
        f_minus = _loss_value(build_loss, params)
        params[pi][idx] = orig
        fd = (f_plus - f_minus) / (2.0 * step)
        worst = max(worst, relative_error(fd, grads[pi][idx]))
        checks += 1

    for _ in range(n_directions):
        direction = [rng.standard_normal(p.shape) for p in params]
        norm = np.sqrt(sum(float(np.sum(d * d)) for d in direction))
        direction = [d / norm for d in direction]
        plus = [p + step * d for p, d in zip(params, direction)]
        minus = [p - step * d for p, d in zip(params, direction)]
        fd = (_loss_value(build_loss, plus) - _loss_value(build_loss, minus)) / (2.0 * step)
        proj = sum(float(np.sum(g * d)) for g, d in zip(grads, direction))
        worst = max(worst, relative_error(fd, proj))
        checks += 1

    return {"max_rel_err": worst, "n_checks": checks, "passed": bool(worst < tol), "tol": tol}


def check_full_gradient(
    build_loss: LossBuilder,
    params: list[np.ndarray],
    step: float = 1e-5,
    tol: float = 1e-4,
) -> dict:
    """Exhaustive coordinate-by-coordinate check, for small parameter counts."""
    params = _as_arrays(params)
    _, grads = autodiff_gradients(build_loss, params)
    worst = 0.0
    for pi, p in enumerate(params):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + step
            f_plus = _loss_value(build_loss, params)
            p[idx] = orig - step
            f_minus = _loss_value(build_loss, params)
            p[idx] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            worst = max(worst, relative_error(fd, grads[pi][idx]))
    return {"max_rel_err": worst, "passed": bool(worst < tol), "tol": tol}
