"""Pinhole camera math, depth-frame-to-cloud conversion, and voxel downsampling.

Coordinate convention: the world frame is the left-camera frame with x right,
y down and z forward along the optical axis, so back-projected points carry
depth directly in z and "up" is the negative y direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

DEFAULT_DEPTH_MIN = 0.3
DEFAULT_DEPTH_MAX = 20.0


class NoDepthError(Exception):
    """Depth lookup landed on an invalid (hole) pixel; caller decides fallback."""


class Point3(NamedTuple):
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters in pixels plus the image size they refer to."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image"
            )

    def contains_pixel(self, x: float, y: float) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


@dataclass(frozen=True)
class DepthFrame:
    """Row-major grid of metric depths; holes are NaN so they never enter arithmetic.

    Values outside the configured sensor range are masked to NaN on
    construction, which keeps the valid-depth invariant by construction.
    """

    depths: np.ndarray  # (height, width) float64, meters, NaN = invalid
    d_min: float = DEFAULT_DEPTH_MIN
    d_max: float = DEFAULT_DEPTH_MAX

    def __post_init__(self):
        if self.depths.ndim != 2:
            raise ValueError(f"depth grid must be 2-D, got shape {self.depths.shape}")
        if self.d_min <= 0 or self.d_max <= self.d_min:
            raise ValueError(f"bad sensor range [{self.d_min}, {self.d_max}]")
        arr = np.asarray(self.depths, dtype=np.float64)
        out_of_range = np.isfinite(arr) & ((arr < self.d_min) | (arr > self.d_max))
        if out_of_range.any():
            arr = arr.copy()
            arr[out_of_range] = np.nan
        arr.flags.writeable = False
        object.__setattr__(self, "depths", arr)

    @property
    def height(self) -> int:
        return self.depths.shape[0]

    @property
    def width(self) -> int:
        return self.depths.shape[1]

    @property
    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.depths)

    def depth_at(self, x: int, y: int) -> float:
        """Depth at an integer pixel; NaN when the pixel is a hole."""
        return float(self.depths[y, x])


@dataclass(frozen=True)
class PointCloud:
    """Ordered collection of finite 3-D points, stored as an (N, 3) array."""

    points: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))

    def __post_init__(self):
        arr = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if arr.size and not np.isfinite(arr).all():
            raise ValueError("point cloud contains non-finite coordinates")
        arr.flags.writeable = False
        object.__setattr__(self, "points", arr)

    def __len__(self) -> int:
        return self.points.shape[0]

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self) == 0:
            raise ValueError("empty cloud has no bounding box")
        return self.points.min(axis=0), self.points.max(axis=0)


def back_project(pixel: tuple[float, float], depth: float, k: CameraIntrinsics) -> Point3:
    """Lift one pixel with known depth to 3-D camera/world coordinates.

    Z is the depth itself, X = (x - cx) * depth / fx, Y = (y - cy) * depth / fy.
    """
    x, y = pixel
    if not k.contains_pixel(x, y):
        raise ValueError(f"pixel ({x}, {y}) outside {k.width}x{k.height} image")
    if not math.isfinite(depth) or depth <= 0:
        raise NoDepthError(f"no usable depth at pixel ({x}, {y}): {depth}")
    return Point3((x - k.cx) * depth / k.fx, (y - k.cy) * depth / k.fy, depth)


def project_point(p: Point3 | tuple[float, float, float], k: CameraIntrinsics) -> tuple[float, float]:
    """Forward pinhole projection; inverse of back_project for z > 0."""
    x, y, z = p
    if z <= 0:
        raise ValueError(f"cannot project point behind the camera (z={z})")
    return (x * k.fx / z + k.cx, y * k.fy / z + k.cy)


def cloud_from_depth(frame: DepthFrame, k: CameraIntrinsics) -> PointCloud:
    """Back-project every valid depth pixel; holes are skipped."""
    if (frame.width, frame.height) != (k.width, k.height):
        raise ValueError(
            f"frame is {frame.width}x{frame.height} but intrinsics expect "
            f"{k.width}x{k.height}"
        )
    vs, us = np.nonzero(frame.valid_mask)
    if us.size == 0:
        return PointCloud()
    d = frame.depths[vs, us]
    pts = np.empty((us.size, 3), dtype=np.float64)
    pts[:, 0] = (us - k.cx) * d / k.fx
    pts[:, 1] = (vs - k.cy) * d / k.fy
    pts[:, 2] = d
    return PointCloud(pts)


def voxel_cells(points: np.ndarray, leaf: float) -> np.ndarray:
    """Integer cell index of each point on the origin-anchored voxel lattice."""
    return np.floor(np.asarray(points, dtype=np.float64) / leaf).astype(np.int64)


def voxel_downsample(cloud: PointCloud, leaf: float) -> PointCloud:
    """Replace the points of each occupied leaf-sized cube by their centroid.

    Cells are anchored at the world origin; output order follows the
    lexicographically sorted cell indices, which keeps runs deterministic.
    """
    if leaf <= 0:
        raise ValueError(f"voxel leaf must be positive, got {leaf}")
    if len(cloud) == 0:
        return PointCloud()
    cells = voxel_cells(cloud.points, leaf)
    uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
    sums = np.zeros((uniq.shape[0], 3), dtype=np.float64)
    np.add.at(sums, inverse, cloud.points)
    counts = np.bincount(inverse, minlength=uniq.shape[0]).astype(np.float64)
    return PointCloud(sums / counts[:, None])
