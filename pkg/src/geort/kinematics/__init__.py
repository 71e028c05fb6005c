"""Kinematic chains, analytical FK, collision capsules, capture synthesis."""

from .capsules import Capsule, CapsuleSet, load_capsules
from .capture import (
    find_pinch_pose,
    frames_from_joint_trajectory,
    generate_proxy_capture,
    tip_trajectories,
)
from .chain import (
    Finger,
    Joint,
    KinematicChain,
    Link,
    RigidTransform,
    clamp_to_limits,
    validate_joint_config,
)
from .fk import (
    CSpaceCloud,
    all_fingertips,
    batch_link_poses,
    finger_forward_batch,
    finger_jacobian_batch,
    forward_kinematics,
    link_transforms,
    sample_cspace_cloud,
    sample_finger_configs,
    tape_fk,
)
from .urdf import load_chain, parse_chain

__all__ = [
    "Capsule",
    "CapsuleSet",
    "CSpaceCloud",
    "Finger",
    "Joint",
    "KinematicChain",
    "Link",
    "RigidTransform",
    "all_fingertips",
    "batch_link_poses",
    "clamp_to_limits",
    "find_pinch_pose",
    "finger_forward_batch",
    "finger_jacobian_batch",
    "forward_kinematics",
    "frames_from_joint_trajectory",
    "generate_proxy_capture",
    "link_transforms",
    "load_capsules",
    "load_chain",
    "parse_chain",
    "sample_cspace_cloud",
    "sample_finger_configs",
    "tape_fk",
    "tip_trajectories",
    "validate_joint_config",
]
