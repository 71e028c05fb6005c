"""Differentiable training objectives for fingertip retargeting.

Five geometric terms shape the per-finger maps without any paired
supervision: direction preservation, workspace coverage (symmetric
Chamfer), flatness (second differences of the composite map), pinch
correspondence, and collision avoidance through a frozen classifier. A
position-matching objective with per-finger scale/origin hyperparameters
is included as the comparison baseline.

Conventions shared by every loss:
- `f_i` is anything with `tape_forward(x: Tensor, params=None) -> Tensor`;
  `fk_i` is a callable mapping a joint Tensor to a position Tensor.
- Full-hand losses take `f` as a RetargetModel or a {finger_id: f_i}
  mapping, `fk` as {finger_id: fk_i}, and `params` as {finger_id: [Tensor]}.
- Human-side quantities (anchors, perturbations, frames) are plain numpy
  and never receive gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .autodiff import tape
from .autodiff.tape import Tensor
from .errors import (
    ConfigError,
    ContractError,
    DegeneracyError,
    ShapeError,
    TrainingDivergenceError,
    UnknownFingerError,
)

DISPLACEMENT_EPS = 1e-9
CLASSIFIER_CLAMP = 1e-6


@dataclass(frozen=True)
class PerturbationSpec:
    """Random displacement draws: isotropic Gaussian with std `sigma` meters,
    `directions` independent draws per anchor."""

    sigma: float = 0.005
    directions: int = 1

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ConfigError("perturbation sigma must be > 0")
        if self.directions < 1:
            raise ConfigError("directions per anchor must be >= 1")


@dataclass(frozen=True)
class LossBreakdown:
    """One training step's term values and the weighted total."""

    dir: float
    cover: float
    flat: float
    pinch: float
    col: float
    lambda1: float
    lambda2: float
    lambda3: float
    lambda4: float
    total: float

    @classmethod
    def from_terms(
        cls,
        dir: float,
        cover: float,
        flat: float,
        pinch: float,
        col: float,
        lambda1: float,
        lambda2: float,
        lambda3: float,
        lambda4: float,
    ) -> "LossBreakdown":
        terms = {"dir": dir, "cover": cover, "flat": flat, "pinch": pinch, "col": col}
        for name, value in terms.items():
            if not np.isfinite(value):
                raise TrainingDivergenceError("loss term is non-finite", term=name)
        total = dir + lambda1 * cover + lambda2 * flat + lambda3 * pinch + lambda4 * col
        return cls(dir, cover, flat, pinch, col, lambda1, lambda2, lambda3, lambda4, total)

    def as_dict(self) -> dict:
        return {
            "dir": self.dir,
            "cover": self.cover,
            "flat": self.flat,
            "pinch": self.pinch,
            "col": self.col,
            "total": self.total,
        }


def draw_perturbations(
    anchors: np.ndarray, perturb: PerturbationSpec, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Replicate anchors `directions` times and draw Gaussian displacements."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    if anchors.shape[0] == 0:
        raise ContractError("anchor batch is empty")
    x = np.repeat(anchors, perturb.directions, axis=0)
    d = rng.normal(0.0, perturb.sigma, size=x.shape)
    return x, d


def _fingers_of(f) -> dict:
    return f.fingers if hasattr(f, "fingers") else dict(f)


def _finger_tips(frames, finger_ids) -> dict[str, np.ndarray]:
    """Per-finger (T, 3) arrays from a Capture-like object or a dict."""
    tips = frames.tips if hasattr(frames, "tips") else frames
    out = {}
    length = None
    for fid in finger_ids:
        if fid not in tips:
            raise UnknownFingerError(f"frames are missing finger {fid!r}")
        arr = np.atleast_2d(np.asarray(tips[fid], dtype=np.float64))
        if length is None:
            length = len(arr)
        elif len(arr) != length:
            raise ShapeError(f"finger {fid!r} has {len(arr)} frames, expected {length}")
        out[fid] = arr
    return out


def _classifier_prob(classifier, q: Tensor) -> Tensor:
    if hasattr(classifier, "tape_forward"):
        return classifier.tape_forward(q)
    return classifier(q)


def loss_dir(
    f_i,
    fk_i,
    anchors: np.ndarray,
    perturb: PerturbationSpec,
    rng: np.random.Generator,
    params: list[Tensor] | None = None,
    stats: dict | None = None,
) -> Tensor:
    """Negative mean cosine between each random displacement and the induced
    fingertip displacement. Samples whose induced displacement is numerically
    zero are skipped and counted; mostly-degenerate batches are an error."""
    x, d = draw_perturbations(anchors, perturb, rng)
    d_norm = np.linalg.norm(d, axis=1)
    valid_h = d_norm > 1e-12
    unit = np.zeros_like(d)
    unit[valid_h] = d[valid_h] / d_norm[valid_h, None]

    base = fk_i(f_i.tape_forward(tape.constant(x), params=params))
    pert = fk_i(f_i.tape_forward(tape.constant(x + d), params=params))
    delta = pert - base

    induced = np.linalg.norm(delta.data, axis=1)
    valid = valid_h & (induced > DISPLACEMENT_EPS)
    total = len(x)
    skipped = int(total - valid.sum())
    if stats is not None:
        stats["skipped"] = skipped
        stats["total"] = total
    if skipped > 0.5 * total:
        raise DegeneracyError(
            f"{skipped}/{total} displacements below {DISPLACEMENT_EPS} m; "
            "the map is (nearly) constant over the anchor region"
        )

    num = tape.tsum(delta * tape.constant(unit), axis=1)
    den = tape.sqrt(tape.tsum(delta * delta, axis=1) + DISPLACEMENT_EPS**2)
    cosines = (num / den) * tape.constant(valid.astype(np.float64))
    return -(tape.tsum(cosines) * (1.0 / int(valid.sum())))


def loss_cover(
    f_i,
    fk_i,
    human_sample: np.ndarray,
    robot_sample: np.ndarray,
    params: list[Tensor] | None = None,
) -> Tensor:
    """Symmetric Chamfer (squared distances) between the images of the human
    sample and the robot reachability sample."""
    human = np.atleast_2d(np.asarray(human_sample, dtype=np.float64))
    robot = np.atleast_2d(np.asarray(robot_sample, dtype=np.float64))
    if human.shape[0] == 0 or robot.shape[0] == 0:
        raise ContractError("Chamfer samples must be non-empty")
    images = fk_i(f_i.tape_forward(tape.constant(human), params=params))
    if images.data.shape[1] != robot.shape[1]:
        raise ShapeError(
            f"image dim {images.data.shape[1]} != robot sample dim {robot.shape[1]}"
        )
    a2 = tape.tsum(images * images, axis=1, keepdims=True)
    b2 = tape.constant(np.sum(robot * robot, axis=1)[None, :])
    cross = images @ tape.constant(robot.T)
    sq = a2 + b2 - cross * 2.0
    to_robot = tape.tmean(tape.min_along(sq, axis=1))
    to_images = tape.tmean(tape.min_along(sq, axis=0))
    return to_robot + to_images


def loss_flat(
    f_i,
    fk_i,
    anchors: np.ndarray,
    perturb: PerturbationSpec,
    rng: np.random.Generator,
    params: list[Tensor] | None = None,
) -> Tensor:
    """Mean squared second difference of g = fk_i∘f_i along random
    displacements; zero iff g is affine along every sampled chord."""
    x, d = draw_perturbations(anchors, perturb, rng)
    g0 = fk_i(f_i.tape_forward(tape.constant(x), params=params))
    gp = fk_i(f_i.tape_forward(tape.constant(x + d), params=params))
    gm = fk_i(f_i.tape_forward(tape.constant(x - d), params=params))
    second = gp + gm - g0 * 2.0
    return tape.tmean(tape.tsum(second * second, axis=1))


def loss_pinch(
    f,
    fk: dict,
    frames,
    threshold_d: float,
    params: dict | None = None,
) -> Tensor:
    """Mean over frames of the summed squared distances between retargeted
    fingertip pairs whose source fingertips are closer than `threshold_d`."""
    fingers = _fingers_of(f)
    tips = _finger_tips(frames, list(fingers))
    n_frames = len(next(iter(tips.values())))

    active: list[tuple[str, str, np.ndarray]] = []
    for fid_a, fid_b in combinations(fingers, 2):
        gap = np.linalg.norm(tips[fid_a] - tips[fid_b], axis=1)
        rows = np.nonzero(gap < threshold_d)[0]
        if len(rows):
            active.append((fid_a, fid_b, rows))
    if not active:
        return tape.constant(0.0)

    needed = {fid for a, b, _ in active for fid in (a, b)}
    robot_tips: dict[str, Tensor] = {}
    for fid in needed:
        p = None if params is None else params.get(fid)
        robot_tips[fid] = fk[fid](fingers[fid].tape_forward(tape.constant(tips[fid]), params=p))

    total = tape.constant(0.0)
    for fid_a, fid_b, rows in active:
        diff = robot_tips[fid_a][rows] - robot_tips[fid_b][rows]
        total = total + tape.tsum(diff * diff)
    return total * (1.0 / n_frames)


def assemble_config(f, joints_by_finger: dict[str, Tensor]) -> Tensor:
    """Column-concatenate per-finger joint tensors into full configs,
    permuted into chain joint order when `f` carries a chain."""
    ordered = list(_fingers_of(f))
    stacked = tape.concat([joints_by_finger[fid] for fid in ordered], axis=1)
    chain = getattr(f, "chain", None)
    if chain is None:
        return stacked
    concat_cols = np.concatenate([chain.finger_joint_indices(fid) for fid in ordered])
    if np.array_equal(concat_cols, np.arange(len(concat_cols))):
        return stacked
    perm = np.argsort(concat_cols)
    return stacked[:, perm]


def loss_col(
    f,
    classifier,
    frames,
    params: dict | None = None,
) -> Tensor:
    """Expected -log(1 - C(q)) of the frozen collision classifier over the
    retargeted configs, with C clamped away from {0, 1}."""
    fingers = _fingers_of(f)
    tips = _finger_tips(frames, list(fingers))
    joints = {}
    for fid, model in fingers.items():
        p = None if params is None else params.get(fid)
        joints[fid] = model.tape_forward(tape.constant(tips[fid]), params=p)
    q = assemble_config(f, joints)
    prob = _classifier_prob(classifier, q)
    clamped = tape.clip(prob, CLASSIFIER_CLAMP, 1.0 - CLASSIFIER_CLAMP)
    return -tape.tmean(tape.log(1.0 - clamped))


def loss_linear_baseline(
    f,
    fk: dict,
    frames,
    alpha: dict[str, float],
    origins: dict[str, tuple[np.ndarray, np.ndarray]],
    perturb: PerturbationSpec | None = None,
    rng: np.random.Generator | None = None,
    smooth_weight: float = 1.0,
    params: dict | None = None,
) -> Tensor:
    """Position-matching objective: each finger chases the affine target
    alpha_i * (x - origin_source) + origin_robot, plus a second-difference
    smoothness regularizer. alpha and origins are its hyperparameters."""
    fingers = _fingers_of(f)
    tips = _finger_tips(frames, list(fingers))
    for fid in fingers:
        if fid not in alpha:
            raise ConfigError(f"baseline is missing alpha for finger {fid!r}")
        if fid not in origins:
            raise ConfigError(f"baseline is missing origins for finger {fid!r}")
    if smooth_weight > 0.0:
        if perturb is None:
            perturb = PerturbationSpec()
        if rng is None:
            rng = np.random.default_rng(0)

    total = tape.constant(0.0)
    for fid, model in fingers.items():
        o_src, o_robot = origins[fid]
        target = float(alpha[fid]) * (tips[fid] - np.asarray(o_src, dtype=np.float64))
        p = None if params is None else params.get(fid)
        images = fk[fid](model.tape_forward(tape.constant(tips[fid]), params=p))
        resid = images - tape.constant(target + np.asarray(o_robot, dtype=np.float64))
        term = tape.tmean(tape.tsum(resid * resid, axis=1))
        if smooth_weight > 0.0:
            term = term + smooth_weight * loss_flat(model, fk[fid], tips[fid], perturb, rng, params=p)
        total = total + term
    return total * (1.0 / len(fingers))
