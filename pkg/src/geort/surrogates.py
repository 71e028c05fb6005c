"""Pretrained stand-ins for simulator queries: neural forward kinematics per
finger and a self-collision probability classifier over full-hand configs.

Both are trained on synthetic data generated from the analytical chain and
capsule oracle, gated on held-out quality, and serialized via the shared
checkpoint format (`kind: "fk"` / `kind: "collision"`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .autodiff import AdamState, FeedForwardNet, adam_step, tape
from .autodiff.tape import Tensor
from .errors import (
    CheckpointFormatError,
    DataError,
    QualityError,
    ShapeError,
)
from .kinematics import CapsuleSet, KinematicChain, finger_forward_batch

MIN_TRAIN_SAMPLES = 1000


@dataclass
class SurrogateTrainConfig:
    hidden_sizes: tuple[int, ...] = (64, 64)
    learning_rate: float = 2e-3
    batch_size: int = 256
    n_iters: int = 4000
    seed: int = 0
    error_ceiling: float = 0.002  # meters, held-out mean Euclidean error
    fresh_check_samples: int = 10000


@dataclass
class ClassifierTrainConfig:
    hidden_sizes: tuple[int, ...] = (64, 64)
    learning_rate: float = 2e-3
    batch_size: int = 512
    n_iters: int = 4000
    seed: int = 0
    calibration_bins: int = 10


def _scale_inputs_np(q: np.ndarray, mid: np.ndarray, half: np.ndarray) -> np.ndarray:
    return (q - mid) / half


class FkSurrogate:
    """Differentiable fingertip-position model: finger joints -> meters."""

    def __init__(
        self,
        finger_id: str,
        net: FeedForwardNet,
        joint_lower: np.ndarray,
        joint_upper: np.ndarray,
        heldout_error: float = float("nan"),
    ):
        self.finger_id = finger_id
        self.net = net
        self.joint_lower = np.asarray(joint_lower, dtype=np.float64)
        self.joint_upper = np.asarray(joint_upper, dtype=np.float64)
        n_joints = len(self.joint_lower)
        if net.sizes[0] != n_joints:
            raise ShapeError(
                f"surrogate net expects {net.sizes[0]} inputs, finger has {n_joints} joints"
            )
        if net.sizes[-1] != 3:
            raise ShapeError("surrogate net must produce 3-D positions")
        self._mid = 0.5 * (self.joint_lower + self.joint_upper)
        self._half = np.maximum(0.5 * (self.joint_upper - self.joint_lower), 1e-9)
        self.heldout_error = float(heldout_error)

    def forward(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        return self.net.forward(_scale_inputs_np(q, self._mid, self._half))

    def tape_forward(self, q: Tensor, params: list[Tensor] | None = None) -> Tensor:
        z = (q - tape.constant(self._mid)) * tape.constant(1.0 / self._half)
        return self.net.tape_forward(z, params=params)

    def __call__(self, q: Tensor) -> Tensor:
        """Frozen-parameter differentiable call, drop-in for analytical FK."""
        return self.tape_forward(q)

    def to_payload(self) -> dict:
        return {
            "finger_id": self.finger_id,
            "sizes": list(self.net.sizes),
            "hidden_activation": self.net.hidden_activation,
            "output_activation": self.net.output_activation,
            "weights": [w.tolist() for w in self.net.weights],
            "biases": [b.tolist() for b in self.net.biases],
            "joint_lower": self.joint_lower.tolist(),
            "joint_upper": self.joint_upper.tolist(),
            "heldout_error": self.heldout_error,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "FkSurrogate":
        try:
            net = FeedForwardNet(
                payload["sizes"],
                [np.asarray(w, dtype=np.float64) for w in payload["weights"]],
                [np.asarray(b, dtype=np.float64) for b in payload["biases"]],
                hidden_activation=payload["hidden_activation"],
                output_activation=payload["output_activation"],
            )
            return cls(
                payload["finger_id"],
                net,
                np.asarray(payload["joint_lower"], dtype=np.float64),
                np.asarray(payload["joint_upper"], dtype=np.float64),
                heldout_error=payload.get("heldout_error", float("nan")),
            )
        except KeyError as exc:
            raise CheckpointFormatError(f"surrogate payload missing {exc}") from exc


class CollisionClassifier:
    """Self-collision probability over full-hand joint configs."""

    def __init__(
        self,
        net: FeedForwardNet,
        joint_lower: np.ndarray,
        joint_upper: np.ndarray,
        prevalence: float = float("nan"),
        heldout_auc: float = float("nan"),
        calibration: list[dict] | None = None,
    ):
        if net.sizes[-1] != 1:
            raise ShapeError("collision net must have one output")
        if net.output_activation != "sigmoid":
            raise ShapeError("collision net needs a sigmoid output")
        self.net = net
        self.joint_lower = np.asarray(joint_lower, dtype=np.float64)
        self.joint_upper = np.asarray(joint_upper, dtype=np.float64)
        if net.sizes[0] != len(self.joint_lower):
            raise ShapeError(
                f"collision net expects {net.sizes[0]} joints, chain has {len(self.joint_lower)}"
            )
        self._mid = 0.5 * (self.joint_lower + self.joint_upper)
        self._half = np.maximum(0.5 * (self.joint_upper - self.joint_lower), 1e-9)
        self.prevalence = float(prevalence)
        self.heldout_auc = float(heldout_auc)
        self.calibration = calibration or []

    def forward(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        out = self.net.forward(_scale_inputs_np(q, self._mid, self._half))
        return out[..., 0]

    def tape_forward(self, q: Tensor, params: list[Tensor] | None = None) -> Tensor:
        z = (q - tape.constant(self._mid)) * tape.constant(1.0 / self._half)
        return self.net.tape_forward(z, params=params)

    def to_payload(self) -> dict:
        return {
            "sizes": list(self.net.sizes),
            "hidden_activation": self.net.hidden_activation,
            "output_activation": self.net.output_activation,
            "weights": [w.tolist() for w in self.net.weights],
            "biases": [b.tolist() for b in self.net.biases],
            "joint_lower": self.joint_lower.tolist(),
            "joint_upper": self.joint_upper.tolist(),
            "prevalence": self.prevalence,
            "heldout_auc": self.heldout_auc,
            "calibration": self.calibration,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "CollisionClassifier":
        try:
            net = FeedForwardNet(
                payload["sizes"],
                [np.asarray(w, dtype=np.float64) for w in payload["weights"]],
                [np.asarray(b, dtype=np.float64) for b in payload["biases"]],
                hidden_activation=payload["hidden_activation"],
                output_activation=payload["output_activation"],
            )
            return cls(
                net,
                np.asarray(payload["joint_lower"], dtype=np.float64),
                np.asarray(payload["joint_upper"], dtype=np.float64),
                prevalence=payload.get("prevalence", float("nan")),
                heldout_auc=payload.get("heldout_auc", float("nan")),
                calibration=payload.get("calibration"),
            )
        except KeyError as exc:
            raise CheckpointFormatError(f"classifier payload missing {exc}") from exc


def roc_auc(labels: np.ndarray, scores: np.ndarray) -> float:
    """Rank-based ROC-AUC (equivalent to the Mann-Whitney U statistic)."""
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")
    ranks = rankdata(np.asarray(scores, dtype=np.float64))
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _minibatch_fit(
    net: FeedForwardNet,
    inputs: np.ndarray,
    make_loss,
    config_lr: float,
    batch_size: int,
    n_iters: int,
    rng: np.random.Generator,
) -> None:
    """Minibatch Adam with a cosine decay to a tenth of the base rate;
    `make_loss(idx, params) -> Tensor`."""
    params = net.parameter_tensors()
    arrays = [t.data for t in params]
    state = AdamState.for_params(arrays, learning_rate=config_lr)
    n = inputs.shape[0]
    for it in range(n_iters):
        state.learning_rate = config_lr * (0.55 + 0.45 * np.cos(np.pi * it / n_iters))
        idx = rng.integers(0, n, size=min(batch_size, n))
        for t in params:
            t.grad = None
        loss = make_loss(idx, params)
        loss.backward()
        adam_step(state, arrays, [t.grad for t in params])


def train_fk_surrogate(
    chain: KinematicChain,
    finger_id: str,
    n_samples: int,
    config: SurrogateTrainConfig | None = None,
) -> FkSurrogate:
    """Fit fingertip positions over configs drawn uniformly within limits.

    90/10 train/held-out split; aborts with a quality error when the held-out
    mean Euclidean error exceeds the ceiling, and re-verifies the bound on
    fresh samples after training.
    """
    config = config or SurrogateTrainConfig()
    if n_samples < MIN_TRAIN_SAMPLES:
        raise QualityError(
            f"{n_samples} samples cannot meet the fidelity gate; need >= {MIN_TRAIN_SAMPLES}"
        )
    lo, hi = chain.finger_limits(finger_id)
    rng = np.random.default_rng(config.seed)
    q_all = rng.uniform(lo, hi, size=(n_samples, len(lo)))
    pos_all = finger_forward_batch(chain, finger_id, q_all)
    n_train = int(0.9 * n_samples)
    q_train, pos_train = q_all[:n_train], pos_all[:n_train]
    q_held, pos_held = q_all[n_train:], pos_all[n_train:]

    net = FeedForwardNet.initialized(
        [len(lo), *config.hidden_sizes, 3], rng, output_activation="identity"
    )
    model = FkSurrogate(finger_id, net, lo, hi)
    z_train = _scale_inputs_np(q_train, model._mid, model._half)
    targets = pos_train

    def make_loss(idx, params):
        out = net.tape_forward(tape.constant(z_train[idx]), params=params)
        diff = out - tape.constant(targets[idx])
        return tape.tmean(tape.tsum(diff * diff, axis=1))

    _minibatch_fit(
        net, z_train, make_loss, config.learning_rate, config.batch_size, config.n_iters, rng
    )

    held_err = float(np.linalg.norm(model.forward(q_held) - pos_held, axis=1).mean())
    model.heldout_error = held_err
    if held_err > config.error_ceiling:
        raise QualityError(
            f"held-out mean error {held_err * 1000:.2f} mm exceeds "
            f"ceiling {config.error_ceiling * 1000:.2f} mm for finger {finger_id!r}"
        )

    if config.fresh_check_samples > 0:
        q_fresh = rng.uniform(lo, hi, size=(config.fresh_check_samples, len(lo)))
        fresh_err = float(
            np.linalg.norm(
                model.forward(q_fresh) - finger_forward_batch(chain, finger_id, q_fresh),
                axis=1,
            ).mean()
        )
        if fresh_err > config.error_ceiling:
            raise QualityError(
                f"fresh-sample mean error {fresh_err * 1000:.2f} mm exceeds "
                f"ceiling {config.error_ceiling * 1000:.2f} mm for finger {finger_id!r}"
            )
    return model


def train_all_fk_surrogates(
    chain: KinematicChain, n_samples: int, config: SurrogateTrainConfig | None = None
) -> dict[str, FkSurrogate]:
    return {
        fid: train_fk_surrogate(chain, fid, n_samples, config) for fid in chain.finger_ids()
    }


def train_collision_classifier(
    chain: KinematicChain,
    capsules: CapsuleSet,
    n_samples: int,
    config: ClassifierTrainConfig | None = None,
) -> CollisionClassifier:
    """Fit collision probability on capsule-oracle labels, reweighting the
    positive class to an effective 50% prevalence."""
    config = config or ClassifierTrainConfig()
    if n_samples < MIN_TRAIN_SAMPLES:
        raise QualityError(
            f"{n_samples} samples cannot support a classifier; need >= {MIN_TRAIN_SAMPLES}"
        )
    lo, hi = chain.joint_limits()
    rng = np.random.default_rng(config.seed)
    q_all = rng.uniform(lo, hi, size=(n_samples, chain.n_joints))
    labels = capsules.self_collides_batch(q_all)
    prevalence = float(labels.mean())
    if prevalence == 0.0 or prevalence == 1.0:
        raise DataError(
            f"all {n_samples} samples are "
            f"{'collisions' if prevalence == 1.0 else 'collision-free'}; widen joint "
            "limits or adjust the capsule set so both classes appear"
        )

    n_train = int(0.9 * n_samples)
    q_train, y_train = q_all[:n_train], labels[:n_train].astype(np.float64)
    q_held, y_held = q_all[n_train:], labels[n_train:]

    net = FeedForwardNet.initialized(
        [chain.n_joints, *config.hidden_sizes, 1], rng, output_activation="sigmoid"
    )
    model = CollisionClassifier(net, lo, hi, prevalence=prevalence)
    z_train = _scale_inputs_np(q_train, model._mid, model._half)

    train_prev = float(y_train.mean())
    if train_prev == 0.0 or train_prev == 1.0:
        raise DataError("training split lost one class; use more samples")
    w_pos = 0.5 / train_prev
    w_neg = 0.5 / (1.0 - train_prev)
    weights = np.where(y_train > 0.5, w_pos, w_neg)

    def make_loss(idx, params):
        p = net.tape_forward(tape.constant(z_train[idx]), params=params)
        p = tape.clip(p, 1e-7, 1.0 - 1e-7)
        y = tape.constant(y_train[idx][:, None])
        w = tape.constant(weights[idx][:, None])
        bce = -1.0 * (y * tape.log(p) + (1.0 - y) * (tape.log(1.0 - p)))
        return tape.tmean(w * bce)

    _minibatch_fit(
        net, z_train, make_loss, config.learning_rate, config.batch_size, config.n_iters, rng
    )

    scores = model.forward(q_held)
    model.heldout_auc = roc_auc(y_held, scores)
    model.calibration = _calibration_table(y_held, scores, config.calibration_bins)
    return model


def _calibration_table(labels: np.ndarray, scores: np.ndarray, n_bins: int) -> list[dict]:
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    table = []
    for b in range(n_bins):
        mask = (scores >= edges[b]) & (
            scores < edges[b + 1] if b < n_bins - 1 else scores <= edges[b + 1]
        )
        if not mask.any():
            continue
        table.append(
            {
                "bin_low": float(edges[b]),
                "bin_high": float(edges[b + 1]),
                "count": int(mask.sum()),
                "mean_score": float(scores[mask].mean()),
                "positive_rate": float(labels[mask].mean()),
            }
        )
    return table
