"""Deterministic synthetic scene generator producing labeled frame bundles.

Scenes are a floor plane (optionally sloped), a back wall, furniture boxes,
and a 19-joint stick figure made of spheres and capsules.  Joint offsets per
pose archetype live in data files under `archetypes/`; each archetype carries
its ground-truth fallen label, and support furniture (bed, couch, table)
where the pose needs it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from . import depth_io, raycast
from .geometry import CameraIntrinsics, DepthFrame, Point3, project_point
from .pipeline import FrameBundle, save_labels
from .pose import Keypoint2D, KeypointId, PoseDetection2D

CAMERA_HEIGHT = 1.25  # meters above the floor plane at the camera's position
REFERENCE_STATURE = 1.75  # joint tables are authored at this body scale

# body primitive radii, meters
HEAD_RADIUS = 0.10
TORSO_RADIUS = 0.10
ARM_RADIUS = 0.065
LEG_RADIUS = 0.07
NECK_RADIUS = 0.05

_LIMBS = [
    (KeypointId.neck, KeypointId.nose, NECK_RADIUS),
    (KeypointId.neck, KeypointId.chest, TORSO_RADIUS),
    (KeypointId.chest, KeypointId.right_hip, TORSO_RADIUS),
    (KeypointId.chest, KeypointId.left_hip, TORSO_RADIUS),
    (KeypointId.neck, KeypointId.right_shoulder, NECK_RADIUS),
    (KeypointId.neck, KeypointId.left_shoulder, NECK_RADIUS),
    (KeypointId.right_shoulder, KeypointId.right_elbow, ARM_RADIUS),
    (KeypointId.right_elbow, KeypointId.right_wrist, ARM_RADIUS),
    (KeypointId.left_shoulder, KeypointId.left_elbow, ARM_RADIUS),
    (KeypointId.left_elbow, KeypointId.left_wrist, ARM_RADIUS),
    (KeypointId.right_hip, KeypointId.right_knee, LEG_RADIUS),
    (KeypointId.right_knee, KeypointId.right_ankle, LEG_RADIUS),
    (KeypointId.left_hip, KeypointId.left_knee, LEG_RADIUS),
    (KeypointId.left_knee, KeypointId.left_ankle, LEG_RADIUS),
]

MAX_BODY_RADIUS = max(HEAD_RADIUS, TORSO_RADIUS, ARM_RADIUS, LEG_RADIUS)

DEFAULT_INTRINSICS = CameraIntrinsics(fx=170.0, fy=170.0, cx=100.0, cy=75.0, width=200, height=150)

ARCHETYPES = (
    "standing",
    "kneeling",
    "lying_floor",
    "lying_ramp",
    "upper_body_off_couch",
    "sleeping_on_bed",
)
FALL_ARCHETYPES = ("lying_floor", "lying_ramp", "upper_body_off_couch")
NONFALL_ARCHETYPES = ("standing", "kneeling", "sleeping_on_bed")


class ScenarioError(ValueError):
    """The scenario cannot be rendered, e.g. the person leaves the frustum."""


@dataclass(frozen=True)
class FurnitureBox:
    """Axis-aligned box resting on the floor, sized and centered in meters."""

    x: float
    z: float
    size_x: float
    size_y: float
    size_z: float


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    archetype: str
    position: tuple[float, float] = (0.0, 4.0)  # (x, z) of the person anchor
    body_scale: float = REFERENCE_STATURE
    floor_slope_deg: float = 0.0
    furniture: tuple[FurnitureBox, ...] = ()
    depth_sigma: float = 0.0
    confidence_range: tuple[float, float] = (0.6, 0.95)
    dropout: float = 0.0
    hole_prob: float = 0.0
    fallen: bool | None = None  # None derives the label from the archetype

    def __post_init__(self):
        if self.archetype not in ARCHETYPES:
            raise ScenarioError(f"unknown archetype {self.archetype!r}")
        if not (0 <= self.dropout < 1 and 0 <= self.hole_prob < 1):
            raise ScenarioError("dropout and hole_prob must lie in [0, 1)")
        if self.body_scale <= 0:
            raise ScenarioError("body_scale must be positive")
        lo, hi = self.confidence_range
        if not (0 <= lo <= hi <= 1):
            raise ScenarioError(f"bad confidence range {self.confidence_range}")
        canonical = archetype_table(self.archetype)["label"] == "fallen"
        if self.fallen is None:
            object.__setattr__(self, "fallen", canonical)
        elif self.fallen != canonical:
            raise ScenarioError(
                f"label {self.fallen} contradicts archetype {self.archetype!r}"
            )


@dataclass(frozen=True)
class SceneTruth:
    """Render-time ground truth kept alongside the emitted bundle."""

    fallen: bool
    hit_class: np.ndarray          # (H, W) raycast.HIT_* per pixel
    joints: Mapping[KeypointId, Point3]  # true joint centers, camera frame
    floor_slope_deg: float
    camera_height: float


_TABLE_CACHE: dict[str, dict] = {}


def archetype_table(name: str) -> dict:
    if name not in _TABLE_CACHE:
        path = resources.files("fallsense.archetypes").joinpath(f"{name}.json")
        _TABLE_CACHE[name] = json.loads(path.read_text())
    return _TABLE_CACHE[name]


def _floor_height(z: float, slope_deg: float) -> float:
    return math.tan(math.radians(slope_deg)) * z


def _to_camera(x: float, y_up: float, z: float) -> tuple[float, float, float]:
    return (x, CAMERA_HEIGHT - y_up, z)


def _box_primitive(box: FurnitureBox, slope_deg: float) -> raycast.Box:
    base = _floor_height(box.z, slope_deg)
    # y grows downward in camera coords, so the top of the box is the low y
    return raycast.Box(
        lo=(box.x - box.size_x / 2, CAMERA_HEIGHT - base - box.size_y, box.z - box.size_z / 2),
        hi=(box.x + box.size_x / 2, CAMERA_HEIGHT - base, box.z + box.size_z / 2),
        hit_class=raycast.HIT_FURNITURE,
    )


def _scene_primitives(spec: ScenarioSpec, joints_cam: dict[KeypointId, Point3]) -> list:
    slope = math.tan(math.radians(spec.floor_slope_deg))
    prims: list = [
        raycast.Plane(point=(0.0, CAMERA_HEIGHT, 0.0), normal=(0.0, 1.0, slope),
                      hit_class=raycast.HIT_FLOOR),
        raycast.Box(lo=(-4.5, CAMERA_HEIGHT - 3.0, 8.0), hi=(4.5, CAMERA_HEIGHT + 0.5, 8.4),
                    hit_class=raycast.HIT_FURNITURE),  # back wall
    ]
    for box in spec.furniture:
        prims.append(_box_primitive(box, spec.floor_slope_deg))

    prims.append(raycast.Sphere(tuple(joints_cam[KeypointId.nose]), HEAD_RADIUS))
    for a, b, radius in _LIMBS:
        prims.append(raycast.Capsule(tuple(joints_cam[a]), tuple(joints_cam[b]), radius))
    return prims


def _support_furniture(spec: ScenarioSpec) -> tuple[FurnitureBox, ...]:
    px, pz = spec.position
    s = spec.body_scale / REFERENCE_STATURE
    boxes = []
    for item in archetype_table(spec.archetype)["support"]:
        boxes.append(
            FurnitureBox(
                x=px + item["dx"] * s,
                z=pz + item["dz"] * s,
                size_x=item["size_x"] * s,
                size_y=item["size_y"] * s,
                size_z=item["size_z"] * s,
            )
        )
    return tuple(boxes)


def _joint_positions(spec: ScenarioSpec) -> dict[KeypointId, Point3]:
    """True joint centers in the camera frame, draped onto the local floor height."""
    px, pz = spec.position
    s = spec.body_scale / REFERENCE_STATURE
    joints = {}
    for name, (ox, oy, oz) in archetype_table(spec.archetype)["joints"].items():
        x = px + ox * s
        z = pz + oz * s
        y_up = _floor_height(z, spec.floor_slope_deg) + oy * s
        joints[KeypointId[name]] = Point3(*_to_camera(x, y_up, z))
    return joints


def generate(
    spec: ScenarioSpec,
    k: CameraIntrinsics = DEFAULT_INTRINSICS,
    frame_id: int = 0,
) -> tuple[FrameBundle, SceneTruth]:
    """Render one labeled frame; identical specs produce identical bundles."""
    rng = np.random.default_rng(spec.seed)
    joints = _joint_positions(spec)

    for part, p in joints.items():
        if p.z < 0.5:
            raise ScenarioError(f"{part.name} too close to the camera (z={p.z:.2f})")
        u, v = project_point(p, k)
        if not (0 <= u < k.width and 0 <= v < k.height):
            raise ScenarioError(
                f"{part.name} projects outside the image at ({u:.1f}, {v:.1f})"
            )

    full_spec = replace(spec, furniture=spec.furniture + _support_furniture(spec))
    depth, hit_class = raycast.render(_scene_primitives(full_spec, joints), k)

    if spec.depth_sigma > 0:
        noise = rng.normal(0.0, spec.depth_sigma, size=depth.shape)
        depth = np.where(np.isfinite(depth), depth + noise, depth)
    if spec.hole_prob > 0:
        holes = rng.random(depth.shape) < spec.hole_prob
        depth = np.where(holes, np.nan, depth)

    keypoints = []
    lo, hi = spec.confidence_range
    for part in KeypointId:  # fixed draw order keeps the rng stream stable
        drop = rng.random() < spec.dropout
        conf = float(rng.uniform(lo, hi))
        if drop:
            continue
        u, v = project_point(joints[part], k)
        keypoints.append(Keypoint2D(part=part, x=u, y=v, confidence=conf))

    bundle = FrameBundle(
        frame_id=frame_id,
        timestamp=float(frame_id),
        depth=DepthFrame(depth),
        intrinsics=k,
        poses=(PoseDetection2D(tuple(keypoints)),),
    )
    truth = SceneTruth(
        fallen=bool(spec.fallen),
        hit_class=hit_class,
        joints=joints,
        floor_slope_deg=spec.floor_slope_deg,
        camera_height=CAMERA_HEIGHT,
    )
    return bundle, truth


def generate_multi(
    specs: "list[ScenarioSpec]",
    k: CameraIntrinsics = DEFAULT_INTRINSICS,
    frame_id: int = 0,
) -> tuple[FrameBundle, list[SceneTruth]]:
    """Render several people into one frame; noise comes from the first spec.

    All specs must agree on the floor slope since they share the scene.
    """
    if not specs:
        raise ScenarioError("need at least one person")
    lead = specs[0]
    if any(s.floor_slope_deg != lead.floor_slope_deg for s in specs):
        raise ScenarioError("all people must share the floor slope")

    rng = np.random.default_rng(lead.seed)
    all_joints = []
    prims: list | None = None
    for spec in specs:
        joints = _joint_positions(spec)
        for part, p in joints.items():
            u, v = project_point(p, k)
            if not (0 <= u < k.width and 0 <= v < k.height):
                raise ScenarioError(f"{part.name} projects outside the image")
        full = replace(spec, furniture=spec.furniture + _support_furniture(spec))
        person_prims = _scene_primitives(full, joints)
        if prims is None:
            prims = person_prims
        else:
            prims += person_prims[2:]  # skip the duplicate floor plane and back wall
        all_joints.append(joints)

    depth, hit_class = raycast.render(prims, k)
    if lead.depth_sigma > 0:
        depth = np.where(np.isfinite(depth),
                         depth + rng.normal(0.0, lead.depth_sigma, size=depth.shape), depth)
    if lead.hole_prob > 0:
        depth = np.where(rng.random(depth.shape) < lead.hole_prob, np.nan, depth)

    poses = []
    for spec, joints in zip(specs, all_joints):
        lo, hi = spec.confidence_range
        kps = []
        for part in KeypointId:
            drop = rng.random() < spec.dropout
            conf = float(rng.uniform(lo, hi))
            if drop:
                continue
            u, v = project_point(joints[part], k)
            kps.append(Keypoint2D(part=part, x=u, y=v, confidence=conf))
        poses.append(PoseDetection2D(tuple(kps)))

    bundle = FrameBundle(
        frame_id=frame_id,
        timestamp=float(frame_id),
        depth=DepthFrame(depth),
        intrinsics=k,
        poses=tuple(poses),
    )
    truths = [
        SceneTruth(
            fallen=bool(spec.fallen),
            hit_class=hit_class,
            joints=joints,
            floor_slope_deg=spec.floor_slope_deg,
            camera_height=CAMERA_HEIGHT,
        )
        for spec, joints in zip(specs, all_joints)
    ]
    return bundle, truths


def sample_corpus_specs(
    n_falls: int,
    n_nonfalls: int,
    seed: int,
    depth_sigma: float = 0.01,
    dropout: float = 0.15,
    hole_prob: float = 0.01,
    confidence_range: tuple[float, float] = (0.6, 0.95),
) -> list[ScenarioSpec]:
    """Deterministic archetype/placement sampling with the requested label balance."""
    if n_falls < 0 or n_nonfalls < 0 or n_falls + n_nonfalls < 1:
        raise ValueError("corpus needs at least one scene")
    rng = np.random.default_rng(seed)
    slots = ["fall"] * n_falls + ["nonfall"] * n_nonfalls
    rng.shuffle(slots)

    specs = []
    counters = {"fall": 0, "nonfall": 0}
    for slot in slots:
        pool = FALL_ARCHETYPES if slot == "fall" else NONFALL_ARCHETYPES
        archetype = pool[counters[slot] % len(pool)]
        counters[slot] += 1

        scene_seed = int(rng.integers(0, 2**32))
        slope = 7.5 if archetype == "lying_ramp" else 0.0
        if archetype in ("upper_body_off_couch", "sleeping_on_bed"):
            x = float(rng.uniform(-0.5, 0.5))
            z = float(rng.uniform(3.7, 4.6))
        else:
            x = float(rng.uniform(-0.7, 0.7))
            z = float(rng.uniform(3.4, 5.0))
        specs.append(
            ScenarioSpec(
                seed=scene_seed,
                archetype=archetype,
                position=(x, z),
                body_scale=float(rng.uniform(1.6, 1.9)),
                floor_slope_deg=slope,
                depth_sigma=depth_sigma,
                dropout=dropout,
                hole_prob=hole_prob,
                confidence_range=confidence_range,
            )
        )
    return specs


def generate_corpus(
    n_falls: int,
    n_nonfalls: int,
    seed: int,
    out_dir: str | Path,
    k: CameraIntrinsics = DEFAULT_INTRINSICS,
    **noise_kwargs,
) -> list[ScenarioSpec]:
    """Write a labeled session directory of synthetic scenes; returns the specs used."""
    from .pipeline import save_frame

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = sample_corpus_specs(n_falls, n_nonfalls, seed, **noise_kwargs)

    labels = {}
    for fid, spec in enumerate(specs):
        bundle, truth = generate(spec, k, frame_id=fid)
        save_frame(out_dir, bundle)
        labels[(fid, 0)] = truth.fallen
    depth_io.write_intrinsics(out_dir / "intrinsics.toml", k)
    save_labels(out_dir / "labels.csv", labels)
    return specs


# --- scenario config files ---------------------------------------------------------

def scenario_from_dict(doc: Mapping) -> ScenarioSpec:
    person = doc.get("person", {})
    noise = doc.get("noise", {})
    furniture = tuple(
        FurnitureBox(
            x=float(item["x"]),
            z=float(item["z"]),
            size_x=float(item["size_x"]),
            size_y=float(item["size_y"]),
            size_z=float(item["size_z"]),
        )
        for item in doc.get("furniture", [])
    )
    label = doc.get("label")
    return ScenarioSpec(
        seed=int(doc.get("seed", 0)),
        archetype=person.get("archetype", "standing"),
        position=tuple(person.get("position", (0.0, 4.0))),
        body_scale=float(person.get("body_scale", REFERENCE_STATURE)),
        floor_slope_deg=float(doc.get("floor", {}).get("slope_deg", 0.0)),
        furniture=furniture,
        depth_sigma=float(noise.get("depth_sigma", 0.0)),
        confidence_range=tuple(noise.get("confidence_range", (0.6, 0.95))),
        dropout=float(noise.get("dropout", 0.0)),
        hole_prob=float(noise.get("hole_prob", 0.0)),
        fallen=None if label is None else label == "fallen",
    )
