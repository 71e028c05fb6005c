"""Parser for the URDF subset used by hand descriptions.

Supported: `fixed` and `revolute` joints with `origin`, `axis`, `limit`.
Anything else is rejected loudly rather than silently dropped. Fingertips
are leaf links; a trailing `_tip` in the leaf name is stripped to form the
finger id.
"""

from __future__ import annotations

import hashlib
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from ..errors import ChainParseError, ChainStructureError, UnsupportedFeatureError
from .chain import Finger, Joint, KinematicChain, Link, RigidTransform

SUPPORTED_JOINT_TYPES = ("fixed", "revolute")


def _parse_vec3(text: str | None, default: tuple[float, float, float]) -> np.ndarray:
    if text is None:
        return np.array(default, dtype=np.float64)
    parts = text.split()
    if len(parts) != 3:
        raise ChainParseError(f"expected 3 numbers, got {text!r}")
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError:
        raise ChainParseError(f"non-numeric vector {text!r}")


def parse_chain(document: str) -> KinematicChain:
    """Parse a URDF-subset document into a validated chain."""
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line = exc.position[0] if exc.position else None
        raise ChainParseError(f"malformed XML: {exc.msg.split(':')[0]}", line=line) from exc

    if root.tag != "robot":
        raise ChainParseError(f"expected <robot> root element, got <{root.tag}>")
    name = root.get("name", "unnamed")

    link_names: list[str] = []
    for el in root.iter("link"):
        link_name = el.get("name")
        if not link_name:
            raise ChainParseError("<link> without a name")
        if link_name in link_names:
            raise ChainParseError(f"duplicate link {link_name!r}")
        link_names.append(link_name)
    if not link_names:
        raise ChainParseError("document declares no links")

    joints: list[Joint] = []
    parent_of: dict[str, tuple[str, str | None, RigidTransform]] = {}
    joint_index = 0
    for el in root.iter("joint"):
        jname = el.get("name")
        jtype = el.get("type")
        if not jname:
            raise ChainParseError("<joint> without a name")
        if jtype not in SUPPORTED_JOINT_TYPES:
            raise UnsupportedFeatureError(
                f"joint {jname!r} has unsupported type {jtype!r}; only fixed and revolute are handled"
            )
        parent_el = el.find("parent")
        child_el = el.find("child")
        if parent_el is None or child_el is None:
            raise ChainParseError(f"joint {jname!r} missing <parent> or <child>")
        parent = parent_el.get("link")
        child = child_el.get("link")
        if parent not in link_names or child not in link_names:
            raise ChainStructureError(f"joint {jname!r} references undeclared links")
        if child in parent_of:
            raise ChainStructureError(f"link {child!r} has more than one parent joint")
        origin_el = el.find("origin")
        xyz = _parse_vec3(origin_el.get("xyz") if origin_el is not None else None, (0, 0, 0))
        rpy = _parse_vec3(origin_el.get("rpy") if origin_el is not None else None, (0, 0, 0))
        origin = RigidTransform.from_xyz_rpy(xyz, rpy)

        if jtype == "fixed":
            parent_of[child] = (parent, None, origin)
            continue

        axis_el = el.find("axis")
        axis = _parse_vec3(axis_el.get("xyz") if axis_el is not None else None, (1, 0, 0))
        norm = float(np.linalg.norm(axis))
        if norm < 1e-12:
            raise ChainParseError(f"joint {jname!r} has a zero axis")
        axis = axis / norm
        limit_el = el.find("limit")
        if limit_el is None or limit_el.get("lower") is None or limit_el.get("upper") is None:
            raise ChainParseError(f"revolute joint {jname!r} needs <limit lower=... upper=...>")
        limits = (float(limit_el.get("lower")), float(limit_el.get("upper")))
        joints.append(Joint(jname, parent, child, origin, axis, limits, joint_index))
        parent_of[child] = (parent, jname, origin)
        joint_index += 1

    links: list[Link] = []
    for link_name in link_names:
        if link_name in parent_of:
            parent, pjoint, origin = parent_of[link_name]
            links.append(Link(link_name, parent, pjoint, origin))
        else:
            links.append(Link(link_name, None, None, RigidTransform.identity()))

    children = {p for (p, _, _) in parent_of.values()}
    leaves = [n for n in link_names if n not in children]
    fingers = []
    for leaf in leaves:
        if len(leaves) > 1 and leaf not in parent_of:
            continue  # isolated root cannot be a fingertip
        finger_id = leaf[: -len("_tip")] if leaf.endswith("_tip") else leaf
        joint_chain = _joint_chain_to(leaf, parent_of)
        fingers.append(Finger(finger_id, leaf, tuple(joint_chain)))

    sha1 = hashlib.sha1(document.encode()).hexdigest()
    return KinematicChain(name, links, joints, fingers, document_sha1=sha1)


def _joint_chain_to(leaf: str, parent_of: dict) -> list[str]:
    chain: list[str] = []
    cur = leaf
    guard = 0
    while cur in parent_of:
        parent, pjoint, _ = parent_of[cur]
        if pjoint is not None:
            chain.append(pjoint)
        cur = parent
        guard += 1
        if guard > 10000:
            raise ChainStructureError("cyclic link graph")
    return list(reversed(chain))


def load_chain(path: str | Path) -> KinematicChain:
    return parse_chain(Path(path).read_text())
