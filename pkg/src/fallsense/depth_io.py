"""File formats for depth frames and camera intrinsics.

Two depth encodings are supported:
  * 16-bit grayscale PNG, one millimeter per unit, 0 marks invalid pixels.
  * raw binary ".depth": magic b"DPTH", little-endian u32 width, u32 height,
    then width*height little-endian float32 meters with NaN for invalid.

Intrinsics travel as a flat TOML file with keys fx, fy, cx, cy, width, height.
"""

from __future__ import annotations

import struct
import sys
from pathlib import Path

import numpy as np
from PIL import Image

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .geometry import DEFAULT_DEPTH_MAX, DEFAULT_DEPTH_MIN, CameraIntrinsics, DepthFrame

DEPTH_MAGIC = b"DPTH"
_HEADER = struct.Struct("<4sII")

INTRINSIC_KEYS = ("fx", "fy", "cx", "cy", "width", "height")


def write_depth_binary(path: str | Path, frame: DepthFrame) -> None:
    data = frame.depths.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DEPTH_MAGIC, frame.width, frame.height))
        fh.write(data)


def read_depth_binary(
    path: str | Path,
    d_min: float = DEFAULT_DEPTH_MIN,
    d_max: float = DEFAULT_DEPTH_MAX,
) -> DepthFrame:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated depth file")
    magic, width, height = _HEADER.unpack_from(raw)
    if magic != DEPTH_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {DEPTH_MAGIC!r}")
    expected = _HEADER.size + 4 * width * height
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(raw)}")
    arr = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(height, width)
    return DepthFrame(arr.astype(np.float64), d_min=d_min, d_max=d_max)


def write_depth_png(path: str | Path, frame: DepthFrame) -> None:
    """Encode to 16-bit millimeter PNG; holes become 0, depths clip at 65.535 m."""
    mm = np.where(frame.valid_mask, np.round(frame.depths * 1000.0), 0.0)
    img = Image.fromarray(np.clip(mm, 0, 65535).astype(np.uint16))
    img.save(path, format="PNG")


def read_depth_png(
    path: str | Path,
    d_min: float = DEFAULT_DEPTH_MIN,
    d_max: float = DEFAULT_DEPTH_MAX,
) -> DepthFrame:
    img = Image.open(path)
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected single-channel depth PNG, got shape {arr.shape}")
    depths = arr.astype(np.float64) / 1000.0
    depths[arr == 0] = np.nan
    return DepthFrame(depths, d_min=d_min, d_max=d_max)


def read_intrinsics(path: str | Path) -> CameraIntrinsics:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    missing = [key for key in INTRINSIC_KEYS if key not in doc]
    if missing:
        raise ValueError(f"{path}: missing intrinsics keys {missing}")
    return CameraIntrinsics(
        fx=float(doc["fx"]),
        fy=float(doc["fy"]),
        cx=float(doc["cx"]),
        cy=float(doc["cy"]),
        width=int(doc["width"]),
        height=int(doc["height"]),
    )


def write_intrinsics(path: str | Path, k: CameraIntrinsics) -> None:
    lines = [
        f"fx = {k.fx!r}",
        f"fy = {k.fy!r}",
        f"cx = {k.cx!r}",
        f"cy = {k.cy!r}",
        f"width = {k.width}",
        f"height = {k.height}",
        "",
    ]
    Path(path).write_text("\n".join(lines))
