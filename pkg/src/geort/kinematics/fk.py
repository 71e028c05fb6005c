"""Analytical forward kinematics, batched, with exact Jacobians.

Positions are fingertip-frame origins expressed in the wrist (root) frame.
The Jacobian of a revolute joint is the textbook geometric form
dp/dq_j = omega_j x (p - o_j), with omega_j the joint axis direction and
o_j the joint origin, both in the wrist frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import tape
from ..autodiff.tape import Tensor
from ..errors import ContractError
from .chain import KinematicChain, PathStep, validate_joint_config


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def _axis_rotations(axis: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Rodrigues rotation matrices, (B, 3, 3), about a fixed unit axis."""
    k = _skew(axis)
    kk = k @ k
    s = np.sin(theta)[:, None, None]
    c = (1.0 - np.cos(theta))[:, None, None]
    return np.eye(3)[None, :, :] + s * k[None, :, :] + c * kk[None, :, :]


def _walk_path(
    path: tuple[PathStep, ...], q_local: np.ndarray, want_jacobian: bool
) -> tuple[np.ndarray, np.ndarray | None]:
    """Compose a root-to-tip path for a (B, n_local) batch of joint values."""
    batch = q_local.shape[0]
    rot = np.broadcast_to(np.eye(3), (batch, 3, 3)).copy()
    pos = np.zeros((batch, 3))
    axes_world: list[np.ndarray] = []
    origins_world: list[np.ndarray] = []
    for step in path:
        pos = pos + np.einsum("bij,j->bi", rot, step.origin.translation)
        rot = rot @ step.origin.rotation
        if step.joint_index is not None:
            if want_jacobian:
                axes_world.append(np.einsum("bij,j->bi", rot, step.axis))
                origins_world.append(pos.copy())
            rj = _axis_rotations(step.axis, q_local[:, step.local_index])
            rot = np.einsum("bij,bjk->bik", rot, rj)
    if not want_jacobian:
        return pos, None
    n_local = q_local.shape[1]
    jac = np.zeros((batch, 3, n_local))
    for j, (axis, origin) in enumerate(zip(axes_world, origins_world)):
        jac[:, :, j] = np.cross(axis, pos - origin)
    return pos, jac


def finger_forward_batch(chain: KinematicChain, finger_id: str, q_local: np.ndarray) -> np.ndarray:
    """Fingertip positions (B, 3) for a (B, n_finger_joints) batch."""
    q_local = np.atleast_2d(np.asarray(q_local, dtype=np.float64))
    path = chain.finger_path(finger_id)
    pos, _ = _walk_path(path, q_local, want_jacobian=False)
    return pos


def finger_jacobian_batch(
    chain: KinematicChain, finger_id: str, q_local: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Positions (B, 3) and Jacobians (B, 3, n_finger_joints)."""
    q_local = np.atleast_2d(np.asarray(q_local, dtype=np.float64))
    path = chain.finger_path(finger_id)
    pos, jac = _walk_path(path, q_local, want_jacobian=True)
    return pos, jac


def tape_fk(chain: KinematicChain, finger_id: str):
    """Differentiable fingertip FK as a tape primitive.

    Returns a callable mapping a (B, n_finger_joints) joint Tensor to a
    (B, 3) position Tensor; the backward pass applies the exact geometric
    Jacobian recorded during the forward walk.
    """
    chain.finger(finger_id)

    def fn(q: Tensor) -> Tensor:
        pos, jac = finger_jacobian_batch(chain, finger_id, q.data)

        def vjp(g: np.ndarray):
            return (np.einsum("bi,bij->bj", g, jac),)

        return tape.from_vjp(pos, (q,), vjp, op="fk")

    return fn


def forward_kinematics(chain: KinematicChain, q, finger_id: str) -> np.ndarray:
    """Fingertip position for one full-chain joint config."""
    values = validate_joint_config(chain, q)
    idx = chain.finger_joint_indices(finger_id)
    return finger_forward_batch(chain, finger_id, values[idx][None, :])[0]


def all_fingertips(chain: KinematicChain, q) -> dict[str, np.ndarray]:
    values = validate_joint_config(chain, q)
    out = {}
    for f in chain.fingers:
        idx = chain.finger_joint_indices(f.finger_id)
        out[f.finger_id] = finger_forward_batch(chain, f.finger_id, values[idx][None, :])[0]
    return out


def batch_link_poses(
    chain: KinematicChain, q_batch: np.ndarray, link_names: list[str]
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """World rotation (B,3,3) and origin (B,3) per requested link, for a
    (B, n_joints) batch of full-chain configs."""
    q_batch = np.atleast_2d(np.asarray(q_batch, dtype=np.float64))
    batch = q_batch.shape[0]
    out: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for name in link_names:
        path = chain.link_path(name)
        rot = np.broadcast_to(np.eye(3), (batch, 3, 3)).copy()
        pos = np.zeros((batch, 3))
        for step in path:
            pos = pos + np.einsum("bij,j->bi", rot, step.origin.translation)
            rot = rot @ step.origin.rotation
            if step.joint_index is not None:
                rj = _axis_rotations(step.axis, q_batch[:, step.joint_index])
                rot = np.einsum("bij,bjk->bik", rot, rj)
        out[name] = (rot, pos)
    return out


def link_transforms(chain: KinematicChain, q) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    values = validate_joint_config(chain, q)
    poses = batch_link_poses(chain, values[None, :], list(chain.links))
    return {name: (r[0], t[0]) for name, (r, t) in poses.items()}


@dataclass
class CSpaceCloud:
    """Point-cloud approximation of one fingertip's reachable set.

    `configs` keeps the generating joint values so every stored point can be
    re-derived exactly; it is dropped on serialization.
    """

    finger_id: str
    points: np.ndarray  # (N, 3) meters, wrist frame
    configs: np.ndarray | None = None  # (N, n_finger_joints)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3 or len(self.points) == 0:
            raise ContractError(f"cloud for {self.finger_id!r} must be a non-empty (N, 3) array")
        if not np.all(np.isfinite(self.points)):
            raise ContractError(f"cloud for {self.finger_id!r} contains non-finite points")

    def __len__(self) -> int:
        return len(self.points)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)


def sample_finger_configs(
    chain: KinematicChain, finger_id: str, n: int, rng: np.random.Generator
) -> np.ndarray:
    lo, hi = chain.finger_limits(finger_id)
    return rng.uniform(lo, hi, size=(n, len(lo)))


def sample_cspace_cloud(
    chain: KinematicChain, finger_id: str, n_samples: int, seed: int
) -> CSpaceCloud:
    """FK images of joint configs drawn uniformly within limits."""
    if n_samples < 1:
        raise ContractError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    configs = sample_finger_configs(chain, finger_id, n_samples, rng)
    points = finger_forward_batch(chain, finger_id, configs)
    return CSpaceCloud(finger_id, points, configs)
