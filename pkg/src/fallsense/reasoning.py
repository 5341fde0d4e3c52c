"""Decision chain: confidence gate, body-size plausibility, CoG/UbC ground distances."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .geometry import Point3
from .ground import GroundLabeling
from .pose import UPPER_BODY_PARTS, Skeleton3D

# See dubois_bsa: motivates the 1 m^2 plausibility floor on the joint bounding box.
DUBOIS_COEFF = 0.007184
DUBOIS_WEIGHT_EXP = 0.425
DUBOIS_HEIGHT_EXP = 0.725

MIN_SKELETON_JOINTS = 3


class NoGroundError(Exception):
    """No ground-labeled points exist; the frame cannot support a distance check."""


class InsufficientEvidenceError(Exception):
    """Fewer joints than needed to measure the person's extent."""


class Decision(Enum):
    NO_PERSON = "no_person"
    INVALID_DETECTION = "invalid_detection"
    NOT_FALLEN = "not_fallen"
    FALLEN = "fallen"


@dataclass(frozen=True)
class ReasoningConfig:
    """Thresholds of the decision chain.

    lambda_continue is the gate for even attempting 3D lifting, lambda_floor
    the stricter-by-usage validity floor inside classification; both exist as
    separate knobs on purpose.  distance_mode picks how "distance to ground"
    is measured: nearest ground point (default) or height above a fitted plane.
    """

    lambda_floor: float = 0.50
    detection_floor: float = 0.01
    bsa_floor: float = 1.0
    height_threshold: float = 0.70
    dwell_frames: int = 3
    lambda_continue: float = 0.60
    distance_mode: str = "nearest"

    def __post_init__(self):
        for name in ("lambda_floor", "detection_floor", "lambda_continue"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.bsa_floor <= 0 or self.height_threshold <= 0:
            raise ValueError("bsa_floor and height_threshold must be positive")
        if self.dwell_frames < 1:
            raise ValueError(f"dwell_frames must be >= 1, got {self.dwell_frames}")
        if self.distance_mode not in ("nearest", "plane"):
            raise ValueError(f"unknown distance_mode {self.distance_mode!r}")

    def with_height_threshold(self, value: float) -> "ReasoningConfig":
        return replace(self, height_threshold=value)


@dataclass(frozen=True)
class ReasoningReport:
    """Every measured quantity plus the decision it led to.

    Geometry fields are None whenever the chain bailed out before they could
    be measured; the decision stays re-derivable from whatever is recorded.
    """

    lambda_: float
    decision: Decision
    box_area: float | None = None
    cog: Point3 | None = None
    ubc: Point3 | None = None
    cog_ground_distance: float | None = None
    ubc_ground_distance: float | None = None
    inconclusive: bool = False

    def to_dict(self) -> dict:
        return {
            "lambda": self.lambda_,
            "box_area_m2": self.box_area,
            "cog": list(self.cog) if self.cog is not None else None,
            "ubc": list(self.ubc) if self.ubc is not None else None,
            "cog_ground_m": self.cog_ground_distance,
            "ubc_ground_m": self.ubc_ground_distance,
            "decision": self.decision.value,
            "inconclusive": self.inconclusive,
        }


def dubois_bsa(weight: float, height: float) -> float:
    """DuBois body surface area in m^2 from weight in kg and height in cm."""
    if weight <= 0 or height <= 0:
        raise ValueError(f"weight and height must be positive, got {weight}, {height}")
    return DUBOIS_COEFF * weight**DUBOIS_WEIGHT_EXP * height**DUBOIS_HEIGHT_EXP


def bounding_box_area(skeleton: Skeleton3D) -> float:
    """Area of the person's plane: product of the two largest joint-box extents.

    Works for standing and lying people alike since the smallest extent is
    always the body's thickness axis.
    """
    if len(skeleton) < MIN_SKELETON_JOINTS:
        raise InsufficientEvidenceError(
            f"need >= {MIN_SKELETON_JOINTS} joints for a bounding box, got {len(skeleton)}"
        )
    pts = skeleton.positions()
    extents = np.sort(pts.max(axis=0) - pts.min(axis=0))
    return float(extents[-1] * extents[-2])


def center_of_gravity(skeleton: Skeleton3D) -> Point3:
    """Unweighted mean of all detected joints."""
    if len(skeleton) == 0:
        raise ValueError("empty skeleton has no center of gravity")
    mean = skeleton.positions().mean(axis=0)
    return Point3(*mean)


def upper_body_critical(skeleton: Skeleton3D) -> Point3 | None:
    """Mean of the nose/eyes/ears/neck/shoulders joints; None when all are missing."""
    pts = skeleton.positions(UPPER_BODY_PARTS)
    if pts.shape[0] == 0:
        return None
    return Point3(*pts.mean(axis=0))


def ground_distance(
    point: Point3, labeling: GroundLabeling, mode: str = "nearest"
) -> float:
    """Distance from a point to the detected ground."""
    ground = labeling.ground
    if ground.shape[0] == 0:
        raise NoGroundError("no ground-labeled points in this frame")
    p = np.asarray(point, dtype=np.float64)
    if mode == "nearest":
        return float(np.min(np.linalg.norm(ground - p, axis=1)))
    if mode == "plane":
        centroid = ground.mean(axis=0)
        # least-squares plane normal = singular vector of the smallest value
        _, _, vt = np.linalg.svd(ground - centroid, full_matrices=False)
        normal = vt[-1]
        return float(abs(np.dot(p - centroid, normal)))
    raise ValueError(f"unknown distance_mode {mode!r}")


def classify(
    skeleton: Skeleton3D | None,
    lambda_: float,
    labeling: GroundLabeling,
    cfg: ReasoningConfig,
) -> ReasoningReport:
    """Run the decision chain for one detection and record every measure.

    No skeleton means no person; a weak confidence or an implausibly small
    body box is a false detection; otherwise the person is fallen exactly
    when CoG or UbC comes closer to the ground than the height threshold.
    A frame without ground evidence conservatively reads as not fallen and
    is flagged inconclusive.
    """
    if skeleton is None:
        return ReasoningReport(lambda_=lambda_, decision=Decision.NO_PERSON)

    cog = center_of_gravity(skeleton)
    ubc = upper_body_critical(skeleton)
    box_area = None
    if len(skeleton) >= MIN_SKELETON_JOINTS:
        box_area = bounding_box_area(skeleton)

    cog_dist = None
    ubc_dist = None
    inconclusive = False
    try:
        cog_dist = ground_distance(cog, labeling, cfg.distance_mode)
        if ubc is not None:
            ubc_dist = ground_distance(ubc, labeling, cfg.distance_mode)
    except NoGroundError:
        inconclusive = True

    if lambda_ < cfg.lambda_floor or box_area is None or box_area < cfg.bsa_floor:
        decision = Decision.INVALID_DETECTION
    elif inconclusive:
        decision = Decision.NOT_FALLEN
    else:
        closest = cog_dist if ubc_dist is None else min(cog_dist, ubc_dist)
        decision = Decision.FALLEN if closest < cfg.height_threshold else Decision.NOT_FALLEN

    return ReasoningReport(
        lambda_=lambda_,
        decision=decision,
        box_area=box_area,
        cog=cog,
        ubc=ubc,
        cog_ground_distance=cog_dist,
        ubc_ground_distance=ubc_dist,
        inconclusive=inconclusive,
    )
