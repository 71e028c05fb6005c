"""Capsule-based self-collision oracle.

Each link carries zero or more capsules (segment + radius) in its local
frame. Two links collide when some capsule pair's segment distance drops
below the sum of radii. Adjacent links (sharing a joint) and explicitly
excluded pairs never count; fingertip pads are excluded pairwise so that
deliberate tip-to-tip contact is not flagged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, SchemaError
from .chain import KinematicChain
from .fk import batch_link_poses


@dataclass(frozen=True)
class Capsule:
    link: str
    p0: np.ndarray  # (3,) link frame
    p1: np.ndarray  # (3,) link frame
    radius: float


def _segment_distance_batch(
    p0: np.ndarray, p1: np.ndarray, q0: np.ndarray, q1: np.ndarray
) -> np.ndarray:
    """Min distance between segments [p0,p1] and [q0,q1], batched (B, 3).

    Clamped closest-point parametrization; the parallel case falls back to
    clamping one parameter and re-projecting the other.
    """
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("bi,bi->b", d1, d1)
    e = np.einsum("bi,bi->b", d2, d2)
    f = np.einsum("bi,bi->b", d2, r)
    c = np.einsum("bi,bi->b", d1, r)
    b = np.einsum("bi,bi->b", d1, d2)
    denom = a * e - b * b
    eps = 1e-12
    # s for non-parallel pairs; parallel pairs take s=0 then fix via t.
    s = np.where(denom > eps, np.clip((b * f - c * e) / np.maximum(denom, eps), 0.0, 1.0), 0.0)
    t = np.where(e > eps, (b * s + f) / np.maximum(e, eps), 0.0)
    t_clamped = np.clip(t, 0.0, 1.0)
    # Re-solve s where t was clamped.
    s = np.where(
        t != t_clamped,
        np.clip((b * t_clamped - c) / np.maximum(a, eps), 0.0, 1.0),
        s,
    )
    # Degenerate (point) segments: the projections above already handle a≈0
    # or e≈0 because the clamped parameters collapse to 0.
    closest1 = p0 + s[:, None] * d1
    closest2 = q0 + t_clamped[:, None] * d2
    return np.linalg.norm(closest1 - closest2, axis=1)


class CapsuleSet:
    """Collision geometry for a chain, loaded from a sidecar JSON file."""

    def __init__(
        self,
        chain: KinematicChain,
        capsules: list[Capsule],
        excluded_pairs: set[frozenset[str]],
    ):
        for cap in capsules:
            if cap.link not in chain.links:
                raise ConfigError(f"capsule references unknown link {cap.link!r}")
            if cap.radius <= 0.0:
                raise ConfigError(f"capsule on {cap.link!r} has non-positive radius")
        self.chain = chain
        self.capsules = list(capsules)
        self._links = sorted({c.link for c in capsules})
        skip = {frozenset(p) for p in chain.adjacent_link_pairs()} | excluded_pairs
        idx_by_link: dict[str, list[int]] = {}
        for i, cap in enumerate(self.capsules):
            idx_by_link.setdefault(cap.link, []).append(i)
        pairs: list[tuple[int, int]] = []
        for a_pos, link_a in enumerate(self._links):
            for link_b in self._links[a_pos + 1 :]:
                if frozenset((link_a, link_b)) in skip:
                    continue
                for i in idx_by_link[link_a]:
                    for j in idx_by_link[link_b]:
                        pairs.append((i, j))
        # no checkable pairs (e.g. a single finger) is legal: nothing collides
        self._pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        self._local_p0 = np.stack([c.p0 for c in self.capsules])
        self._local_p1 = np.stack([c.p1 for c in self.capsules])
        radii = np.array([c.radius for c in self.capsules])
        self._pair_threshold = radii[self._pairs[:, 0]] + radii[self._pairs[:, 1]]

    def _world_segments(self, q_batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Capsule endpoints in the wrist frame, each (B, n_capsules, 3)."""
        poses = batch_link_poses(self.chain, q_batch, self._links)
        batch = np.atleast_2d(q_batch).shape[0]
        n = len(self.capsules)
        w0 = np.empty((batch, n, 3))
        w1 = np.empty((batch, n, 3))
        for i, cap in enumerate(self.capsules):
            rot, pos = poses[cap.link]
            w0[:, i, :] = np.einsum("bij,j->bi", rot, cap.p0) + pos
            w1[:, i, :] = np.einsum("bij,j->bi", rot, cap.p1) + pos
        return w0, w1

    def pair_separations(self, q_batch: np.ndarray) -> np.ndarray:
        """Signed clearance per checked pair, (B, n_pairs); negative = overlap."""
        q_batch = np.atleast_2d(np.asarray(q_batch, dtype=np.float64))
        if len(self._pairs) == 0:
            return np.empty((q_batch.shape[0], 0))
        w0, w1 = self._world_segments(q_batch)
        i, j = self._pairs[:, 0], self._pairs[:, 1]
        batch, n_pairs = q_batch.shape[0], len(self._pairs)
        p0 = w0[:, i, :].reshape(-1, 3)
        p1 = w1[:, i, :].reshape(-1, 3)
        q0 = w0[:, j, :].reshape(-1, 3)
        q1 = w1[:, j, :].reshape(-1, 3)
        dist = _segment_distance_batch(p0, p1, q0, q1).reshape(batch, n_pairs)
        return dist - self._pair_threshold[None, :]

    def min_separation(self, q) -> float:
        seps = self.pair_separations(np.asarray(q)[None, :])
        return float(seps.min()) if seps.size else float("inf")

    def self_collides(self, q) -> bool:
        return self.min_separation(q) < 0.0

    def self_collides_batch(self, q_batch: np.ndarray) -> np.ndarray:
        seps = self.pair_separations(q_batch)
        if seps.shape[1] == 0:
            return np.zeros(seps.shape[0], dtype=bool)
        return seps.min(axis=1) < 0.0


def _parse_point(value, field: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != 3:
        raise SchemaError(f"{field} must be a 3-element list", field=field)
    try:
        arr = np.array([float(v) for v in value])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{field} has a non-numeric entry", field=field) from exc
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{field} has a non-finite entry", field=field)
    return arr


def load_capsules(path: str | Path, chain: KinematicChain) -> CapsuleSet:
    """Read a capsule sidecar: {"capsules": [...], "excluded_pairs": [...]}."""
    try:
        document = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"capsule file is not valid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(document, dict) or "capsules" not in document:
        raise SchemaError("capsule file must be an object with a 'capsules' list")
    capsules = []
    for entry in document["capsules"]:
        if not isinstance(entry, dict):
            raise SchemaError("capsule entries must be objects", field="capsules")
        missing = {"link", "p0", "p1", "radius"} - set(entry)
        if missing:
            raise SchemaError(f"capsule entry missing {sorted(missing)}", field="capsules")
        capsules.append(
            Capsule(
                link=str(entry["link"]),
                p0=_parse_point(entry["p0"], "p0"),
                p1=_parse_point(entry["p1"], "p1"),
                radius=float(entry["radius"]),
            )
        )
    excluded: set[frozenset[str]] = set()
    for pair in document.get("excluded_pairs", []):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError("excluded_pairs entries must be 2-element lists", field="excluded_pairs")
        excluded.add(frozenset((str(pair[0]), str(pair[1]))))
    return CapsuleSet(chain, capsules, excluded)
