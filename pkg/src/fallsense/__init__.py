"""Geometric fallen-person detection from depth frames and 2D pose keypoints."""

from .geometry import (
    CameraIntrinsics,
    DepthFrame,
    NoDepthError,
    Point3,
    PointCloud,
    back_project,
    cloud_from_depth,
    project_point,
    voxel_downsample,
)
from .ground import (
    ElevationGrid,
    GroundFilterParams,
    GroundLabeling,
    opening,
    progressive_filter,
    rasterize,
)
from .pipeline import (
    FrameBundle,
    NotificationEvent,
    SessionResult,
    process_frame,
    run_session,
    threshold_sweep,
)
from .pose import (
    Keypoint2D,
    KeypointId,
    LiftError,
    PoseDetection2D,
    Skeleton3D,
    UnknownKeypointError,
    average_confidence,
    lift_pose,
)
from .reasoning import (
    Decision,
    NoGroundError,
    ReasoningConfig,
    ReasoningReport,
    bounding_box_area,
    center_of_gravity,
    classify,
    dubois_bsa,
    ground_distance,
    upper_body_critical,
)
from .synthcorpus import ScenarioSpec, generate, generate_corpus

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "DepthFrame",
    "Decision",
    "ElevationGrid",
    "FrameBundle",
    "GroundFilterParams",
    "GroundLabeling",
    "Keypoint2D",
    "KeypointId",
    "LiftError",
    "NoDepthError",
    "NoGroundError",
    "NotificationEvent",
    "Point3",
    "PointCloud",
    "PoseDetection2D",
    "ReasoningConfig",
    "ReasoningReport",
    "ScenarioSpec",
    "SessionResult",
    "Skeleton3D",
    "UnknownKeypointError",
    "average_confidence",
    "back_project",
    "bounding_box_area",
    "center_of_gravity",
    "classify",
    "cloud_from_depth",
    "dubois_bsa",
    "generate",
    "generate_corpus",
    "ground_distance",
    "lift_pose",
    "opening",
    "process_frame",
    "progressive_filter",
    "project_point",
    "rasterize",
    "run_session",
    "threshold_sweep",
    "upper_body_critical",
    "voxel_downsample",
]
