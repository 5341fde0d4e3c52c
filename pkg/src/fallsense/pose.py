"""Keypoint schema, confidence gating, and lifting 2D detections to 3D skeletons."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .geometry import CameraIntrinsics, DepthFrame, Point3, back_project


class UnknownKeypointError(ValueError):
    """A keypoint document used a part name outside the 19-part schema."""


class LiftError(Exception):
    """Too few keypoints could be placed in 3D to reason about the person."""


class KeypointId(Enum):
    """The 19 body parts, in the order used for serialization."""

    nose = 0
    neck = 1
    chest = 2
    right_eye = 3
    left_eye = 4
    right_ear = 5
    left_ear = 6
    right_shoulder = 7
    left_shoulder = 8
    right_elbow = 9
    left_elbow = 10
    right_wrist = 11
    left_wrist = 12
    right_hip = 13
    left_hip = 14
    right_knee = 15
    left_knee = 16
    right_ankle = 17
    left_ankle = 18


# Head-and-shoulder parts whose proximity to the ground marks a critical posture.
UPPER_BODY_PARTS = frozenset(
    {
        KeypointId.nose,
        KeypointId.right_eye,
        KeypointId.left_eye,
        KeypointId.right_ear,
        KeypointId.left_ear,
        KeypointId.neck,
        KeypointId.right_shoulder,
        KeypointId.left_shoulder,
    }
)


@dataclass(frozen=True)
class Keypoint2D:
    part: KeypointId
    x: float
    y: float
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"{self.part.name}: confidence {self.confidence} outside [0, 1]")
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError(f"{self.part.name}: non-finite pixel coordinates")


@dataclass(frozen=True)
class PoseDetection2D:
    """One detected person: up to 19 keypoints, at most one per part."""

    keypoints: tuple[Keypoint2D, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "keypoints", tuple(self.keypoints))
        parts = [kp.part for kp in self.keypoints]
        if len(parts) != len(set(parts)):
            raise ValueError("duplicate keypoint parts in one detection")

    def __len__(self) -> int:
        return len(self.keypoints)

    def get(self, part: KeypointId) -> Keypoint2D | None:
        for kp in self.keypoints:
            if kp.part is part:
                return kp
        return None


@dataclass(frozen=True)
class Skeleton3D:
    """Per-part 3D joint positions with the confidence they were detected at."""

    joints: Mapping[KeypointId, tuple[Point3, float]]

    def __post_init__(self):
        joints = dict(self.joints)
        if not joints:
            raise ValueError("skeleton needs at least one joint")
        for part, (p, _conf) in joints.items():
            if not all(np.isfinite(c) for c in p):
                raise ValueError(f"{part.name}: non-finite joint position")
        object.__setattr__(self, "joints", joints)

    def __len__(self) -> int:
        return len(self.joints)

    def __contains__(self, part: KeypointId) -> bool:
        return part in self.joints

    def positions(self, parts: Iterable[KeypointId] | None = None) -> np.ndarray:
        """Joint coordinates as an (K, 3) array, ordered by part id."""
        if parts is None:
            selected = sorted(self.joints, key=lambda p: p.value)
        else:
            selected = sorted((p for p in parts if p in self.joints), key=lambda p: p.value)
        return np.array([self.joints[p][0] for p in selected], dtype=np.float64).reshape(-1, 3)


def average_confidence(pose: PoseDetection2D, detection_floor: float = 0.01) -> float:
    """Mean confidence over the keypoints counted as detected.

    A keypoint counts as detected when its confidence is strictly above the
    floor; an empty set yields 0 rather than an error.
    """
    if not (0.0 <= detection_floor < 1.0):
        raise ValueError(f"detection floor {detection_floor} outside [0, 1)")
    detected = [kp.confidence for kp in pose.keypoints if kp.confidence > detection_floor]
    if not detected:
        return 0.0
    return float(sum(detected) / len(detected))


def lift_pose(
    pose: PoseDetection2D,
    frame: DepthFrame,
    k: CameraIntrinsics,
    patch: int = 2,
    min_joints: int = 3,
) -> Skeleton3D:
    """Place each keypoint in 3D using the median depth of its pixel neighborhood.

    The depth is read from a (2*patch+1)^2 window centered on the keypoint so
    single-pixel holes at limb silhouettes do not kill the joint; keypoints
    with no valid depth anywhere in the window are dropped.  Fewer than
    `min_joints` survivors raise LiftError.
    """
    if len(pose) == 0:
        raise ValueError("cannot lift an empty pose")
    if (frame.width, frame.height) != (k.width, k.height):
        raise ValueError(
            f"frame is {frame.width}x{frame.height} but intrinsics expect "
            f"{k.width}x{k.height}"
        )
    if patch < 0:
        raise ValueError(f"patch must be >= 0, got {patch}")

    joints: dict[KeypointId, tuple[Point3, float]] = {}
    for kp in pose.keypoints:
        if not k.contains_pixel(kp.x, kp.y):
            continue
        px, py = int(round(kp.x)), int(round(kp.y))
        px = min(px, frame.width - 1)
        py = min(py, frame.height - 1)
        window = frame.depths[
            max(0, py - patch) : py + patch + 1,
            max(0, px - patch) : px + patch + 1,
        ]
        if not np.isfinite(window).any():
            continue
        depth = float(np.nanmedian(window))
        joints[kp.part] = (back_project((kp.x, kp.y), depth, k), kp.confidence)

    if len(joints) < max(min_joints, 1):
        raise LiftError(f"only {len(joints)} of {len(pose)} keypoints found usable depth")
    return Skeleton3D(joints)


# --- keypoint JSON interchange ------------------------------------------------

def pose_from_dict(doc: Mapping) -> PoseDetection2D:
    keypoints = []
    for item in doc.get("keypoints", []):
        name = item.get("part")
        try:
            part = KeypointId[name]
        except KeyError:
            raise UnknownKeypointError(f"unknown keypoint part {name!r}") from None
        keypoints.append(
            Keypoint2D(
                part=part,
                x=float(item["x"]),
                y=float(item["y"]),
                confidence=float(item["confidence"]),
            )
        )
    return PoseDetection2D(tuple(keypoints))


def parse_poses_json(text: str) -> list[PoseDetection2D]:
    """Decode a `{"people": [...]}` document into one detection per person."""
    doc = json.loads(text)
    if "people" not in doc:
        raise ValueError('keypoint document missing "people" array')
    return [pose_from_dict(person) for person in doc["people"]]


def pose_to_dict(pose: PoseDetection2D) -> dict:
    return {
        "keypoints": [
            {"part": kp.part.name, "x": kp.x, "y": kp.y, "confidence": kp.confidence}
            for kp in sorted(pose.keypoints, key=lambda kp: kp.part.value)
        ]
    }


def poses_to_json(poses: Iterable[PoseDetection2D]) -> str:
    return json.dumps({"people": [pose_to_dict(p) for p in poses]}, indent=1)
