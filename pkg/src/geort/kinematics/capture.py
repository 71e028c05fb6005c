"""Synthetic capture generation.

Drives a proxy hand through a smooth bounded-velocity joint-space walk,
splices in deliberate fingertip pinch segments, and emits per-frame
fingertip positions in the wire format used by the data loaders.

Frame-to-frame fingertip displacement is kept under ``TIP_STEP_BUDGET``
meters by budgeting each joint's step against its lever arm: a revolute
joint whose axis sits at distance ``r`` from the fingertip moves the tip
by at most ``r * |dq|``, so capping ``sum_j r_j * |dq_j|`` per finger
caps the tip displacement.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from .chain import KinematicChain
from .fk import finger_forward_batch

TIP_STEP_BUDGET = 0.0045  # meters of fingertip travel allowed per frame
PINCH_HOLD_FRAMES = 30
PINCH_ACCEPT_DIST = 0.008  # a splice counts as a pinch only below this gap


def tip_trajectories(chain: KinematicChain, q_traj: np.ndarray) -> dict[str, np.ndarray]:
    """Per-finger tip paths (T, 3) for a (T, n_joints) joint trajectory."""
    q_traj = np.atleast_2d(np.asarray(q_traj, dtype=np.float64))
    out = {}
    for fid in chain.finger_ids():
        idx = chain.finger_joint_indices(fid)
        out[fid] = finger_forward_batch(chain, fid, q_traj[:, idx])
    return out


def frames_from_joint_trajectory(chain: KinematicChain, q_traj: np.ndarray) -> list[dict]:
    tips = tip_trajectories(chain, q_traj)
    n = np.atleast_2d(q_traj).shape[0]
    frames = []
    for t in range(n):
        frames.append(
            {
                "t": t,
                "fingers": {fid: [float(v) for v in tips[fid][t]] for fid in tips},
            }
        )
    return frames


def tip_lever_arms(chain: KinematicChain, finger_id: str) -> np.ndarray:
    """Upper bound, per moving joint, on the fingertip's distance from that
    joint's axis: the sum of link-offset lengths distal to the joint."""
    path = chain.finger_path(finger_id)
    n_local = len(chain.finger(finger_id).joint_names)
    levers = np.zeros(n_local)
    for k, step in enumerate(path):
        if step.local_index is None:
            continue
        distal = sum(float(np.linalg.norm(s.origin.translation)) for s in path[k + 1 :])
        levers[step.local_index] = distal
    return levers


def _per_joint_step_caps(chain: KinematicChain, budget: float) -> np.ndarray:
    """Per-joint |dq| caps so every fingertip moves at most `budget` per frame."""
    lo, hi = chain.joint_limits()
    caps = np.full(chain.n_joints, np.inf)
    for fid in chain.finger_ids():
        idx = chain.finger_joint_indices(fid)
        levers = np.maximum(tip_lever_arms(chain, fid), 1e-6)
        caps[idx] = np.minimum(caps[idx], budget / (len(idx) * levers))
    return np.minimum(caps, 0.25 * (hi - lo))


def _splice_lengths(
    chain: KinematicChain, delta_q: np.ndarray, budget: float
) -> int:
    """Frames needed to interpolate a joint delta with a cosine ease while
    keeping each fingertip under `budget` meters of travel per frame."""
    worst = 0.0
    for fid in chain.finger_ids():
        idx = chain.finger_joint_indices(fid)
        levers = tip_lever_arms(chain, fid)
        worst = max(worst, float(np.sum(levers * np.abs(delta_q[idx]))))
    # cosine ease slope peaks at pi/2, so per-frame delta <= (pi/2) dq/(A-1)
    return max(2, int(np.ceil(1.0 + 0.5 * np.pi * worst / budget)))


def find_pinch_pose(
    chain: KinematicChain,
    finger_a: str,
    finger_b: str,
    rng: np.random.Generator,
    base_q: np.ndarray | None = None,
    n_candidates: int = 2000,
    refine_rounds: int = 4,
) -> tuple[np.ndarray, float]:
    """Joint config bringing two fingertips as close as random search finds.

    Only the two fingers' joints move; the rest stay at `base_q` (or mid
    range). Returns (full config, achieved tip distance in meters).
    """
    lo, hi = chain.joint_limits()
    if base_q is None:
        base_q = 0.5 * (lo + hi)
    base_q = np.asarray(base_q, dtype=np.float64)
    idx_a = chain.finger_joint_indices(finger_a)
    idx_b = chain.finger_joint_indices(finger_b)
    moving = np.concatenate([idx_a, idx_b])
    if len(set(moving.tolist())) != len(moving):
        raise ContractError(f"fingers {finger_a!r} and {finger_b!r} share joints")

    def tip_dist(union: np.ndarray) -> np.ndarray:
        qa = union[:, : len(idx_a)]
        qb = union[:, len(idx_a) :]
        ta = finger_forward_batch(chain, finger_a, qa)
        tb = finger_forward_batch(chain, finger_b, qb)
        return np.linalg.norm(ta - tb, axis=1)

    u_lo, u_hi = lo[moving], hi[moving]
    cand = rng.uniform(u_lo, u_hi, size=(n_candidates, len(moving)))
    dist = tip_dist(cand)
    best = cand[int(np.argmin(dist))]
    best_dist = float(dist.min())
    sigma = 0.15 * (u_hi - u_lo)
    for _ in range(refine_rounds):
        trial = np.clip(best + rng.normal(0.0, 1.0, size=(256, len(moving))) * sigma, u_lo, u_hi)
        dist = tip_dist(trial)
        i = int(np.argmin(dist))
        if dist[i] < best_dist:
            best, best_dist = trial[i], float(dist[i])
        sigma *= 0.5
    q_full = base_q.copy()
    q_full[moving] = best
    return q_full, best_dist


def _walk_segment(
    lo: np.ndarray,
    hi: np.ndarray,
    n_frames: int,
    rng: np.random.Generator,
    max_step: np.ndarray,
    momentum: float,
    q0: np.ndarray,
    v0: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bounded-velocity joint walk from (q0, v0), (T, n). Steps are clamped
    (not reflected) at limits so per-frame deltas never exceed `max_step`."""
    q = q0.copy()
    v = v0.copy()
    out = np.empty((n_frames, len(q)))
    for t in range(n_frames):
        v = momentum * v + rng.normal(0.0, 0.4, size=len(q)) * max_step
        v = np.clip(v, -max_step, max_step)
        proposed = q + v
        clamped = np.clip(proposed, lo, hi)
        v[proposed != clamped] *= -1.0  # bounce the velocity, keep the step bounded
        q = clamped
        out[t] = q
    return out, q, v


def _ease(alpha: np.ndarray) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(np.pi * alpha)


def generate_proxy_capture(
    chain: KinematicChain,
    n_frames: int,
    seed: int,
    pinch_interval: int = 300,
    momentum: float = 0.9,
) -> list[dict]:
    """Smooth exploratory capture with pinch events roughly every
    `pinch_interval` frames between adjacent finger pairs.

    Deterministic given `seed`. Consecutive frames keep every fingertip
    displacement under ``TIP_STEP_BUDGET``; ``n_frames=0`` yields ``[]``.
    """
    if n_frames < 0:
        raise ContractError("n_frames must be >= 0")
    if n_frames == 0:
        return []
    rng = np.random.default_rng(seed)
    lo, hi = chain.joint_limits()
    span = hi - lo
    max_step = _per_joint_step_caps(chain, TIP_STEP_BUDGET)

    fids = chain.finger_ids()
    pairs = [(fids[i], fids[i + 1]) for i in range(len(fids) - 1)]
    segments: list[np.ndarray] = []
    total = 0
    q = rng.uniform(lo + 0.2 * span, hi - 0.2 * span)
    v = np.zeros_like(q)
    k = 0
    while total < n_frames:
        jitter = int(rng.integers(-(pinch_interval // 4), pinch_interval // 4 + 1)) if pinch_interval > 4 else 0
        gap = max(pinch_interval + jitter, 1) if pairs and pinch_interval > 0 else n_frames - total
        seg, q, v = _walk_segment(lo, hi, min(gap, n_frames - total), rng, max_step, momentum, q, v)
        segments.append(seg)
        total += seg.shape[0]
        if total >= n_frames or not pairs or pinch_interval <= 0:
            continue
        for attempt in range(len(pairs)):
            pair = pairs[(k + attempt) % len(pairs)]
            q_pinch, gap_m = find_pinch_pose(chain, pair[0], pair[1], rng, base_q=q)
            if gap_m >= PINCH_ACCEPT_DIST:
                continue
            a_in = _splice_lengths(chain, q_pinch - q, TIP_STEP_BUDGET)
            alpha = _ease(np.linspace(0.0, 1.0, a_in + 1))[1:, None]
            approach = (1.0 - alpha) * q[None, :] + alpha * q_pinch[None, :]
            hold = np.tile(q_pinch, (PINCH_HOLD_FRAMES, 1))
            event = np.concatenate([approach, hold], axis=0)[: n_frames - total]
            segments.append(event)
            total += event.shape[0]
            q, v = q_pinch.copy(), np.zeros_like(q)  # walk resumes from the pinch
            k += 1
            break
    return frames_from_joint_trajectory(chain, np.concatenate(segments, axis=0))
