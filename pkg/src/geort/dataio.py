"""File formats: capture JSONL, reachability cloud JSON, checkpoint JSON.

All positions are meters in the owning hand's wrist frame. Coordinates with
magnitude over half a meter are rejected as a units mistake (millimeter
exports are the common case) rather than silently producing garbage.

Checkpoints are versioned JSON written atomically (tmp file + rename) with
sorted keys, so identical models serialize to identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .errors import (
    CheckpointFormatError,
    CheckpointVersionError,
    DataError,
    SchemaError,
    UnitsError,
)
from .kinematics.fk import CSpaceCloud

CHECKPOINT_VERSION = 1
MAX_COORD_M = 0.5


class Capture:
    """A fingertip trajectory: ascending integer timestamps, a fixed finger
    set, one 3-D point per finger per frame."""

    def __init__(self, times: np.ndarray, tips: dict[str, np.ndarray]):
        self.times = np.asarray(times, dtype=np.int64)
        self.tips = {fid: np.asarray(p, dtype=np.float64) for fid, p in tips.items()}
        n = len(self.times)
        if n == 0:
            raise DataError("capture has no frames")
        for fid, pts in self.tips.items():
            if pts.shape != (n, 3):
                raise DataError(f"finger {fid!r} has {pts.shape}, expected ({n}, 3)")
        if np.any(np.diff(self.times) <= 0):
            raise DataError("capture timestamps must be strictly increasing")

    @property
    def finger_ids(self) -> list[str]:
        return list(self.tips)

    def __len__(self) -> int:
        return len(self.times)

    def frame(self, i: int) -> dict[str, np.ndarray]:
        return {fid: self.tips[fid][i] for fid in self.tips}

    def to_frames(self) -> list[dict]:
        return [
            {
                "t": int(self.times[i]),
                "fingers": {fid: [float(v) for v in self.tips[fid][i]] for fid in self.tips},
            }
            for i in range(len(self))
        ]

    @classmethod
    def from_frames(cls, frames: list[dict]) -> "Capture":
        if not frames:
            raise DataError("capture has no frames")
        finger_ids = list(frames[0]["fingers"])
        times = np.array([f["t"] for f in frames], dtype=np.int64)
        tips = {
            fid: np.array([f["fingers"][fid] for f in frames], dtype=np.float64)
            for fid in finger_ids
        }
        return cls(times, tips)


def _parse_capture_line(raw: str, line_no: int) -> tuple[int, dict[str, list[float]]]:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", line=line_no) from exc
    if not isinstance(obj, dict):
        raise SchemaError("frame must be a JSON object", line=line_no)
    if "t" not in obj:
        raise SchemaError("frame missing 't'", line=line_no, field="t")
    t = obj["t"]
    if isinstance(t, bool) or not isinstance(t, int):
        raise SchemaError("'t' must be an integer", line=line_no, field="t")
    fingers = obj.get("fingers")
    if not isinstance(fingers, dict) or not fingers:
        raise SchemaError("'fingers' must be a non-empty object", line=line_no, field="fingers")
    parsed: dict[str, list[float]] = {}
    for fid, coords in fingers.items():
        if not isinstance(coords, list) or len(coords) != 3:
            raise SchemaError(
                f"finger {fid!r} must map to [x, y, z]", line=line_no, field=f"fingers.{fid}"
            )
        values = []
        for c in coords:
            if isinstance(c, bool) or not isinstance(c, (int, float)):
                raise SchemaError(
                    f"finger {fid!r} has a non-numeric coordinate",
                    line=line_no,
                    field=f"fingers.{fid}",
                )
            values.append(float(c))
        if not all(np.isfinite(values)):
            raise SchemaError(
                f"finger {fid!r} has a non-finite coordinate",
                line=line_no,
                field=f"fingers.{fid}",
            )
        if max(abs(v) for v in values) > MAX_COORD_M:
            raise UnitsError(
                f"line {line_no}: finger {fid!r} coordinate exceeds {MAX_COORD_M} m; "
                "positions must be meters in the wrist frame (millimeters?)"
            )
        parsed[fid] = values
    return t, parsed


def load_capture(path: str | Path) -> Capture:
    path = Path(path)
    frames: list[dict] = []
    finger_ids: list[str] | None = None
    last_t: int | None = None
    with path.open() as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            t, fingers = _parse_capture_line(raw, line_no)
            if finger_ids is None:
                finger_ids = list(fingers)
            elif set(fingers) != set(finger_ids):
                raise SchemaError(
                    f"finger set changed: expected {sorted(finger_ids)}, got {sorted(fingers)}",
                    line=line_no,
                    field="fingers",
                )
            if last_t is not None and t <= last_t:
                raise SchemaError(
                    f"'t' must be strictly increasing ({t} after {last_t})",
                    line=line_no,
                    field="t",
                )
            last_t = t
            frames.append({"t": t, "fingers": fingers})
    if not frames:
        raise DataError(f"{path} contains no frames")
    return Capture.from_frames(frames)


def save_capture(path: str | Path, capture: Capture | list[dict]) -> None:
    frames = capture.to_frames() if isinstance(capture, Capture) else capture
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w") as fh:
        for frame in frames:
            fh.write(json.dumps(frame, sort_keys=True))
            fh.write("\n")
    os.replace(tmp, path)


def load_cloud(path: str | Path) -> CSpaceCloud:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(obj, dict) or "finger" not in obj or "points" not in obj:
        raise SchemaError("cloud file must be {'finger': ..., 'points': [...]}")
    points = np.asarray(obj["points"], dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise SchemaError("'points' must be a list of [x, y, z]", field="points")
    if not np.all(np.isfinite(points)):
        raise SchemaError("'points' contains non-finite values", field="points")
    if np.abs(points).max() > MAX_COORD_M:
        raise UnitsError(
            f"{path.name}: cloud coordinates exceed {MAX_COORD_M} m; expected meters"
        )
    return CSpaceCloud(str(obj["finger"]), points)


def save_cloud(path: str | Path, cloud: CSpaceCloud) -> None:
    path = Path(path)
    doc = {"finger": cloud.finger_id, "points": [[float(v) for v in p] for p in cloud.points]}
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True))
    os.replace(tmp, path)


def load_cloud_dir(directory: str | Path) -> dict[str, CSpaceCloud]:
    directory = Path(directory)
    clouds: dict[str, CSpaceCloud] = {}
    for path in sorted(directory.glob("*.json")):
        cloud = load_cloud(path)
        if cloud.finger_id in clouds:
            raise DataError(f"duplicate cloud for finger {cloud.finger_id!r} in {directory}")
        clouds[cloud.finger_id] = cloud
    if not clouds:
        raise DataError(f"no cloud files (*.json) found in {directory}")
    return clouds


def save_checkpoint(path: str | Path, kind: str, payload: dict, meta: dict | None = None) -> None:
    path = Path(path)
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "kind": kind,
        "payload": payload,
        "meta": meta or {},
    }
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True))
    os.replace(tmp, path)


def load_checkpoint(path: str | Path, expected_kind: str | None = None) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointFormatError(f"{path.name} is not valid JSON: {exc.msg}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CheckpointFormatError(f"{path.name} has no format_version")
    version = doc["format_version"]
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path.name} uses format version {version}, this build reads {CHECKPOINT_VERSION}"
        )
    for key in ("kind", "payload"):
        if key not in doc:
            raise CheckpointFormatError(f"{path.name} missing {key!r}")
    if expected_kind is not None and doc["kind"] != expected_kind:
        raise CheckpointFormatError(
            f"{path.name} is a {doc['kind']!r} checkpoint, expected {expected_kind!r}"
        )
    return doc


def sha1_of_file(path: str | Path) -> str:
    digest = hashlib.sha1()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def sha1_of_array(arr: np.ndarray) -> str:
    arr = np.ascontiguousarray(arr)
    digest = hashlib.sha1()
    digest.update(str(arr.shape).encode())
    digest.update(str(arr.dtype).encode())
    digest.update(arr.tobytes())
    return digest.hexdigest()


def capture_hash(capture: Capture) -> str:
    digest = hashlib.sha1()
    digest.update(sha1_of_array(capture.times).encode())
    for fid in capture.finger_ids:
        digest.update(fid.encode())
        digest.update(sha1_of_array(capture.tips[fid]).encode())
    return digest.hexdigest()
