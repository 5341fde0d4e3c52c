"""Progressive morphological ground filtering of downsampled point clouds.

The cloud is rasterized onto a horizontal min-elevation grid, then opened with
growing square windows.  Cells whose surface drops by more than a
slope-dependent threshold at any window size are object cells; everything
else is ground candidate.  A final per-point pass re-checks each point
against its own cell's raw minimum so that points rising out of a
ground-level cell (chair legs, wall faces, shins) are not dragged into the
ground set by the low floor measurement they share a cell with.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .geometry import PointCloud

# "up" in the camera frame: y points down, so up is -y.
DEFAULT_UP = (0.0, -1.0, 0.0)


@dataclass(frozen=True)
class GroundFilterParams:
    """Knobs of the progressive filter; windows are half-widths in cells."""

    cell_size: float = 0.15
    initial_window: int = 1
    max_window: int = 16
    window_growth: float = 2.0
    initial_threshold: float = 0.05  # dh_0, meters
    slope: float = 0.3               # rise/run tolerance, unitless
    max_threshold: float = 0.5       # dh_max, meters

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if not (0 < self.initial_window < self.max_window):
            raise ValueError(
                f"need 0 < initial_window < max_window, got "
                f"{self.initial_window}, {self.max_window}"
            )
        if self.window_growth < 1.0:
            raise ValueError(f"window_growth must be >= 1, got {self.window_growth}")
        if not (0 < self.initial_threshold <= self.max_threshold):
            raise ValueError(
                f"need 0 < initial_threshold <= max_threshold, got "
                f"{self.initial_threshold}, {self.max_threshold}"
            )
        if self.slope < 0:
            raise ValueError(f"slope must be >= 0, got {self.slope}")

    def windows(self) -> list[int]:
        """Strictly increasing window sizes, growing by `window_growth` up to the cap."""
        out = []
        w = self.initial_window
        while w <= self.max_window:
            out.append(w)
            w = max(w + 1, int(round(w * self.window_growth)))
        return out

    def threshold(self, window: int, prev_window: int) -> float:
        """Elevation-difference tolerance for one opening step."""
        dh = self.slope * (window - prev_window) * self.cell_size + self.initial_threshold
        return min(self.max_threshold, dh)


@dataclass(frozen=True)
class ElevationGrid:
    """Min-elevation raster over the horizontal plane.

    `filled` flags cells that had no points and inherited their nearest
    neighbor's elevation; `point_cells` maps every cloud point to its
    (row, col) cell so labels can be carried back to points.
    """

    cell_size: float
    origin: tuple[float, float]        # (x, z) of the low corner
    elevation: np.ndarray              # (rows, cols) float64, meters, up positive
    filled: np.ndarray                 # (rows, cols) bool
    point_cells: np.ndarray            # (N, 2) int rows/cols per cloud point

    @property
    def shape(self) -> tuple[int, int]:
        return self.elevation.shape


def _up_axes(up) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit up vector plus two horizontal axes spanning the ground plane."""
    u = np.asarray(up, dtype=np.float64)
    norm = np.linalg.norm(u)
    if norm == 0:
        raise ValueError("up vector must be non-zero")
    u = u / norm
    if abs(u[1]) > 0.999999:  # camera-level default: grid axes are exactly x and z
        return u, np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])
    h1 = np.cross(u, [0.0, 0.0, 1.0])
    h1 /= np.linalg.norm(h1)
    h2 = np.cross(u, h1)
    return u, h1, h2


def rasterize(cloud: PointCloud, cell_size: float, up=DEFAULT_UP) -> ElevationGrid:
    """Grid the cloud by horizontal position, keeping the minimum elevation per cell."""
    if len(cloud) == 0:
        raise ValueError("cannot rasterize an empty cloud")
    if cell_size <= 0:
        raise ValueError(f"cell_size must be positive, got {cell_size}")

    u, h1, h2 = _up_axes(up)
    elev = cloud.points @ u
    gx = cloud.points @ h1
    gz = cloud.points @ h2

    x0, z0 = float(gx.min()), float(gz.min())
    cols = np.floor((gx - x0) / cell_size).astype(np.int64)
    rows = np.floor((gz - z0) / cell_size).astype(np.int64)
    n_rows = int(rows.max()) + 1
    n_cols = int(cols.max()) + 1

    surface = np.full((n_rows, n_cols), np.inf)
    np.minimum.at(surface, (rows, cols), elev)
    empty = ~np.isfinite(surface)
    if empty.any():
        # nearest-neighbor fill so morphology sees a complete surface
        _, (ri, ci) = ndimage.distance_transform_edt(empty, return_indices=True)
        surface = surface[ri, ci]

    return ElevationGrid(
        cell_size=cell_size,
        origin=(x0, z0),
        elevation=surface,
        filled=empty,
        point_cells=np.column_stack([rows, cols]),
    )


def _erode(grid: np.ndarray, window: int) -> np.ndarray:
    """Windowed minimum with the window clipped at the grid border."""
    return -_dilate(-grid, window)


def _dilate(grid: np.ndarray, window: int) -> np.ndarray:
    # separable max filter: pad with -inf, slide along rows then columns
    out = grid
    for axis in (0, 1):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (window, window)
        padded = np.pad(out, pad, constant_values=-np.inf)
        view = np.lib.stride_tricks.sliding_window_view(padded, 2 * window + 1, axis=axis)
        out = view.max(axis=-1)
    return out


def opening(grid: ElevationGrid, window: int) -> ElevationGrid:
    """Grayscale opening of the elevation channel with a (2*window+1)^2 element."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    opened = _dilate(_erode(grid.elevation, window), window)
    return ElevationGrid(
        cell_size=grid.cell_size,
        origin=grid.origin,
        elevation=opened,
        filled=grid.filled,
        point_cells=grid.point_cells,
    )


@dataclass(frozen=True)
class GroundLabeling:
    """Partition of a cloud into ground and non-ground points."""

    points: np.ndarray       # the labeled cloud, (N, 3)
    ground_mask: np.ndarray  # (N,) bool

    @property
    def ground(self) -> np.ndarray:
        return self.points[self.ground_mask]

    @property
    def non_ground(self) -> np.ndarray:
        return self.points[~self.ground_mask]


def progressive_filter(
    cloud: PointCloud, params: GroundFilterParams, up=DEFAULT_UP
) -> GroundLabeling:
    """Classify every cloud point as ground or non-ground.

    Opening windows double from `initial_window` up to `max_window`; a cell
    whose surface exceeds the opened surface by more than the step's
    threshold marks its points as objects.  Points that tower above their
    own cell's raw minimum by more than the first-step threshold are objects
    too, even if the cell itself reads as ground.
    """
    grid = rasterize(cloud, params.cell_size, up)
    u, _, _ = _up_axes(up)
    elev = cloud.points @ u

    surface = grid.elevation
    raw_min = grid.elevation.copy()
    object_cell = np.zeros(grid.shape, dtype=bool)
    prev_w = 0
    dh_first = None
    for w in params.windows():
        opened = _dilate(_erode(surface, w), w)
        dh = params.threshold(w, prev_w)
        if dh_first is None:
            dh_first = dh
        object_cell |= (surface - opened) > dh
        surface = opened
        prev_w = w
    if dh_first is None:  # no window fits; everything defaults to ground
        dh_first = params.threshold(params.initial_window, 0)

    rows = grid.point_cells[:, 0]
    cols = grid.point_cells[:, 1]
    non_ground = object_cell[rows, cols] | ((elev - raw_min[rows, cols]) > dh_first)
    return GroundLabeling(points=cloud.points, ground_mask=~non_ground)


def write_labeling_ply(path: str | Path, labeling: GroundLabeling) -> None:
    """ASCII PLY debug dump: green ground points, red non-ground, plus a flag byte."""
    n = labeling.points.shape[0]
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {n}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "property uchar is_ground",
        "end_header",
    ]
    for (x, y, z), is_ground in zip(labeling.points, labeling.ground_mask):
        r, g = (0, 200) if is_ground else (200, 0)
        lines.append(f"{x:.6f} {y:.6f} {z:.6f} {r} {g} 0 {int(is_ground)}")
    Path(path).write_text("\n".join(lines) + "\n")
