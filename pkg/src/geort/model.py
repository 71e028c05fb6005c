"""Retargeting models: per-finger networks mapping a fingertip position in
the source hand's wrist frame to joint angles of the matching robot finger.

Each finger head normalizes its input by capture statistics, runs a small
tanh MLP, and rescales the [-1, 1] output to the finger's joint limits, so
raw network outputs always decode to feasible joint values.
"""

from __future__ import annotations

import numpy as np

from .autodiff import tape
from .autodiff.nets import FeedForwardNet
from .autodiff.tape import Tensor
from .errors import CheckpointFormatError, ContractError, ShapeError, UnknownFingerError
from .kinematics.chain import KinematicChain

MIN_INPUT_SCALE = 1e-3


def input_normalization(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis center and half-range of observed inputs, scale floored so a
    flat axis cannot divide by zero."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ShapeError(f"expected (N, 3) points, got {points.shape}")
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    center = 0.5 * (lo + hi)
    scale = np.maximum(0.5 * (hi - lo), MIN_INPUT_SCALE)
    return center, scale


class FingerModel:
    """One finger's network plus its input/output scaling."""

    def __init__(
        self,
        finger_id: str,
        net: FeedForwardNet,
        input_center: np.ndarray,
        input_scale: np.ndarray,
        joint_lower: np.ndarray,
        joint_upper: np.ndarray,
    ):
        if net.sizes[0] != 3:
            raise ShapeError(f"finger net must take 3 inputs, has {net.sizes[0]}")
        if net.output_activation != "tanh":
            raise ContractError("finger net output must be tanh so joints stay in range")
        n_out = net.sizes[-1]
        input_center = np.asarray(input_center, dtype=np.float64)
        input_scale = np.asarray(input_scale, dtype=np.float64)
        joint_lower = np.asarray(joint_lower, dtype=np.float64)
        joint_upper = np.asarray(joint_upper, dtype=np.float64)
        if input_center.shape != (3,) or input_scale.shape != (3,):
            raise ShapeError("input center/scale must be (3,)")
        if joint_lower.shape != (n_out,) or joint_upper.shape != (n_out,):
            raise ShapeError(f"joint bounds must be ({n_out},)")
        if np.any(input_scale <= 0.0):
            raise ContractError("input scale must be positive")
        if np.any(joint_upper <= joint_lower):
            raise ContractError("joint bounds must satisfy lower < upper")
        self.finger_id = finger_id
        self.net = net
        self.input_center = input_center
        self.input_scale = input_scale
        self.joint_lower = joint_lower
        self.joint_upper = joint_upper
        self._joint_mid = 0.5 * (joint_lower + joint_upper)
        self._joint_half = 0.5 * (joint_upper - joint_lower)

    @property
    def n_joints(self) -> int:
        return self.net.sizes[-1]

    @classmethod
    def initialized(
        cls,
        finger_id: str,
        chain: KinematicChain,
        source_points: np.ndarray,
        hidden_sizes: list[int],
        rng: np.random.Generator,
    ) -> "FingerModel":
        lo, hi = chain.finger_limits(finger_id)
        center, scale = input_normalization(source_points)
        net = FeedForwardNet.initialized(
            [3, *hidden_sizes, len(lo)], rng, output_activation="tanh"
        )
        return cls(finger_id, net, center, scale, lo, hi)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Joint angles for fingertip positions (3,) or (B, 3), numpy path."""
        x = np.asarray(x, dtype=np.float64)
        y = self.net.forward((x - self.input_center) / self.input_scale)
        return self._joint_mid + self._joint_half * y

    def tape_forward(self, x: Tensor, params: list[Tensor] | None = None) -> Tensor:
        """Differentiable path; `params` as in `FeedForwardNet.tape_forward`."""
        z = (x - tape.constant(self.input_center)) * tape.constant(1.0 / self.input_scale)
        y = self.net.tape_forward(z, params=params)
        return tape.constant(self._joint_mid) + tape.constant(self._joint_half) * y

    def to_payload(self) -> dict:
        return {
            "finger_id": self.finger_id,
            "sizes": list(self.net.sizes),
            "weights": [w.tolist() for w in self.net.weights],
            "biases": [b.tolist() for b in self.net.biases],
            "input_center": self.input_center.tolist(),
            "input_scale": self.input_scale.tolist(),
            "joint_lower": self.joint_lower.tolist(),
            "joint_upper": self.joint_upper.tolist(),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "FingerModel":
        try:
            net = FeedForwardNet(
                payload["sizes"],
                [np.array(w, dtype=np.float64) for w in payload["weights"]],
                [np.array(b, dtype=np.float64) for b in payload["biases"]],
                output_activation="tanh",
            )
            return cls(
                payload["finger_id"],
                net,
                np.array(payload["input_center"]),
                np.array(payload["input_scale"]),
                np.array(payload["joint_lower"]),
                np.array(payload["joint_upper"]),
            )
        except KeyError as exc:
            raise CheckpointFormatError(f"finger payload missing {exc.args[0]!r}") from exc


class RetargetModel:
    """All finger heads for one robot hand, assembled into full joint configs."""

    def __init__(self, chain: KinematicChain, fingers: dict[str, FingerModel]):
        missing = set(chain.finger_ids()) - set(fingers)
        extra = set(fingers) - set(chain.finger_ids())
        if missing or extra:
            raise ContractError(
                f"finger models do not match chain fingers (missing {sorted(missing)}, "
                f"extra {sorted(extra)})"
            )
        for fid, model in fingers.items():
            lo, _ = chain.finger_limits(fid)
            if model.n_joints != len(lo):
                raise ShapeError(
                    f"finger {fid!r}: model emits {model.n_joints} joints, chain has {len(lo)}"
                )
        self.chain = chain
        self.fingers = {fid: fingers[fid] for fid in chain.finger_ids()}

    @property
    def finger_ids(self) -> list[str]:
        return list(self.fingers)

    def map_frame(self, tips: dict[str, np.ndarray]) -> np.ndarray:
        """Full-chain joint config for one frame of source fingertips."""
        q = np.empty(len(self.chain.joints))
        for fid, model in self.fingers.items():
            if fid not in tips:
                raise UnknownFingerError(f"frame is missing finger {fid!r}")
            q[self.chain.finger_joint_indices(fid)] = model.forward(np.asarray(tips[fid]))
        return q

    def map_batch(self, tips: dict[str, np.ndarray]) -> np.ndarray:
        """Joint configs (T, n_joints) for per-finger tip arrays (T, 3)."""
        lengths = {fid: len(np.atleast_2d(tips[fid])) for fid in self.fingers}
        if len(set(lengths.values())) > 1:
            raise ShapeError(f"finger trajectories disagree in length: {lengths}")
        n = next(iter(lengths.values()))
        q = np.empty((n, len(self.chain.joints)))
        for fid, model in self.fingers.items():
            q[:, self.chain.finger_joint_indices(fid)] = model.forward(np.atleast_2d(tips[fid]))
        return q

    def to_payload(self) -> dict:
        return {
            "chain_name": self.chain.name,
            "chain_sha1": self.chain.document_sha1,
            "fingers": {fid: m.to_payload() for fid, m in self.fingers.items()},
        }

    @classmethod
    def from_payload(cls, payload: dict, chain: KinematicChain) -> "RetargetModel":
        try:
            stored = payload["chain_sha1"]
            finger_payloads = payload["fingers"]
        except KeyError as exc:
            raise CheckpointFormatError(f"retargeter payload missing {exc.args[0]!r}") from exc
        if stored != chain.document_sha1:
            raise CheckpointFormatError(
                f"checkpoint was trained against chain {payload.get('chain_name')!r} "
                f"(sha1 {stored[:12]}), but the provided chain differs"
            )
        fingers = {fid: FingerModel.from_payload(p) for fid, p in finger_payloads.items()}
        return cls(chain, fingers)
