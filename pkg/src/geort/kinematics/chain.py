"""Kinematic chain model: rigid transforms, revolute joints, finger paths.

A chain is immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ChainStructureError, ConfigError, ShapeError, UnknownFingerError

AXIS_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation, applied as p -> R p + t."""

    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_xyz_rpy(cls, xyz, rpy) -> "RigidTransform":
        # URDF fixed-axis convention: R = Rz(yaw) Ry(pitch) Rx(roll)
        r, p, y = rpy
        cr, sr = np.cos(r), np.sin(r)
        cp, sp = np.cos(p), np.sin(p)
        cy, sy = np.cos(y), np.sin(y)
        rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
        ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
        rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
        return cls(rz @ ry @ rx, np.asarray(xyz, dtype=np.float64))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation


@dataclass(frozen=True)
class Joint:
    name: str
    parent_link: str
    child_link: str
    origin: RigidTransform
    axis: np.ndarray  # unit vector in the child frame
    limits: tuple[float, float]
    index: int  # position in the chain-ordered joint vector


@dataclass(frozen=True)
class Link:
    name: str
    parent_link: str | None
    parent_joint: str | None  # None for the root; may be a fixed attachment
    fixed_origin: RigidTransform  # child frame in parent frame at zero angle


@dataclass(frozen=True)
class Finger:
    finger_id: str
    tip_link: str
    joint_names: tuple[str, ...]  # root-to-tip order


@dataclass(frozen=True)
class PathStep:
    """One hop of a compiled root-to-tip path: a fixed transform, then an
    optional rotation about `axis` by the joint value at `joint_index`."""

    origin: RigidTransform
    joint_index: int | None
    local_index: int | None  # position within the finger's own joint vector
    axis: np.ndarray | None
    link: str


class KinematicChain:
    """Parsed hand: a link tree rooted at the wrist with revolute joints only."""

    def __init__(
        self,
        name: str,
        links: list[Link],
        joints: list[Joint],
        fingers: list[Finger],
        document_sha1: str = "",
    ):
        self.name = name
        self.links = {l.name: l for l in links}
        self.joints = list(joints)
        self.joints_by_name = {j.name: j for j in joints}
        self.fingers = list(fingers)
        self.fingers_by_id = {f.finger_id: f for f in fingers}
        self.document_sha1 = document_sha1
        self._validate()
        self._paths = {f.finger_id: self._compile_path(f) for f in self.fingers}
        self._all_link_paths = {name: self._compile_link_path(name) for name in self.links}

    # ---- validation ----

    def _validate(self) -> None:
        roots = [l.name for l in self.links.values() if l.parent_link is None]
        if len(roots) != 1:
            raise ChainStructureError(f"expected one root link, found {roots}")
        self.root = roots[0]
        # tree check: walk up from every link, detect cycles / dangling parents
        for link in self.links.values():
            seen = set()
            cur: str | None = link.name
            while cur is not None:
                if cur in seen:
                    raise ChainStructureError(f"cycle through link {cur!r}")
                seen.add(cur)
                parent = self.links[cur].parent_link
                if parent is not None and parent not in self.links:
                    raise ChainStructureError(f"link {cur!r} references unknown parent {parent!r}")
                cur = parent
        children = {l.parent_link for l in self.links.values() if l.parent_link}
        leaves = {name for name in self.links if name not in children}
        for joint in self.joints:
            norm = float(np.linalg.norm(joint.axis))
            if abs(norm - 1.0) > AXIS_UNIT_TOL:
                raise ChainStructureError(f"joint {joint.name!r} axis is not unit length")
            lo, hi = joint.limits
            if not lo < hi:
                raise ConfigError(f"joint {joint.name!r} limits must satisfy lo < hi, got [{lo}, {hi}]")
        for finger in self.fingers:
            if finger.tip_link not in leaves:
                raise ChainStructureError(f"fingertip link {finger.tip_link!r} is not a leaf")

    # ---- structure queries ----

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def finger(self, finger_id: str) -> Finger:
        try:
            return self.fingers_by_id[finger_id]
        except KeyError:
            raise UnknownFingerError(f"unknown finger {finger_id!r}; have {sorted(self.fingers_by_id)}")

    def finger_ids(self) -> list[str]:
        return [f.finger_id for f in self.fingers]

    def finger_joint_indices(self, finger_id: str) -> np.ndarray:
        f = self.finger(finger_id)
        return np.array([self.joints_by_name[n].index for n in f.joint_names], dtype=np.intp)

    def finger_limits(self, finger_id: str) -> tuple[np.ndarray, np.ndarray]:
        f = self.finger(finger_id)
        lo = np.array([self.joints_by_name[n].limits[0] for n in f.joint_names])
        hi = np.array([self.joints_by_name[n].limits[1] for n in f.joint_names])
        return lo, hi

    def joint_limits(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([j.limits[0] for j in self.joints])
        hi = np.array([j.limits[1] for j in self.joints])
        return lo, hi

    def finger_path(self, finger_id: str) -> tuple[PathStep, ...]:
        self.finger(finger_id)
        return self._paths[finger_id]

    def link_path(self, link_name: str) -> tuple[PathStep, ...]:
        return self._all_link_paths[link_name]

    def adjacent_link_pairs(self) -> set[frozenset[str]]:
        return {
            frozenset((l.parent_link, l.name))
            for l in self.links.values()
            if l.parent_link is not None
        }

    # ---- path compilation ----

    def _link_chain_to_root(self, link_name: str) -> list[Link]:
        out = []
        cur: str | None = link_name
        while cur is not None:
            link = self.links[cur]
            out.append(link)
            cur = link.parent_link
        return list(reversed(out))

    def _compile_link_path(self, link_name: str) -> tuple[PathStep, ...]:
        steps = []
        local = 0
        for link in self._link_chain_to_root(link_name):
            if link.parent_link is None:
                continue
            joint = self.joints_by_name.get(link.parent_joint) if link.parent_joint else None
            if joint is None:
                steps.append(PathStep(link.fixed_origin, None, None, None, link.name))
            else:
                steps.append(
                    PathStep(link.fixed_origin, joint.index, local, joint.axis, link.name)
                )
                local += 1
        return tuple(steps)

    def _compile_path(self, finger: Finger) -> tuple[PathStep, ...]:
        steps = self._compile_link_path(finger.tip_link)
        joint_order = [s.joint_index for s in steps if s.joint_index is not None]
        expected = [self.joints_by_name[n].index for n in finger.joint_names]
        if joint_order != expected:
            raise ChainStructureError(
                f"finger {finger.finger_id!r} joint chain does not match its tip path"
            )
        return steps


def clamp_to_limits(chain: KinematicChain, values: np.ndarray) -> np.ndarray:
    lo, hi = chain.joint_limits()
    return np.clip(values, lo, hi)


def validate_joint_config(chain: KinematicChain, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (chain.n_joints,):
        raise ShapeError(f"joint config shape {values.shape} != ({chain.n_joints},)")
    return values
