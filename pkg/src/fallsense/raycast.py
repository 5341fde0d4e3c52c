"""Minimal analytic ray caster for synthetic depth scenes.

Every ray leaves the camera origin with direction ((u-cx)/fx, (v-cy)/fy, 1),
so the ray parameter of a hit *is* its depth.  Supported primitives are
planes, axis-aligned boxes, spheres and capsules, each tagged with a class
id so renders double as per-pixel ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics

HIT_NONE = 0
HIT_FLOOR = 1
HIT_FURNITURE = 2
HIT_PERSON = 3

_EPS = 1e-12


@dataclass(frozen=True)
class Plane:
    point: tuple[float, float, float]
    normal: tuple[float, float, float]
    hit_class: int = HIT_FLOOR


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    hit_class: int = HIT_FURNITURE


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    hit_class: int = HIT_PERSON


@dataclass(frozen=True)
class Capsule:
    a: tuple[float, float, float]
    b: tuple[float, float, float]
    radius: float
    hit_class: int = HIT_PERSON


def ray_directions(k: CameraIntrinsics) -> np.ndarray:
    """(H, W, 3) ray directions with unit z, one per pixel center."""
    us = np.arange(k.width, dtype=np.float64)
    vs = np.arange(k.height, dtype=np.float64)
    dx = (us - k.cx) / k.fx
    dy = (vs - k.cy) / k.fy
    dirs = np.empty((k.height, k.width, 3))
    dirs[:, :, 0] = dx[None, :]
    dirs[:, :, 1] = dy[:, None]
    dirs[:, :, 2] = 1.0
    return dirs


def _plane_t(dirs: np.ndarray, plane: Plane) -> np.ndarray:
    n = np.asarray(plane.normal, dtype=np.float64)
    p0 = np.asarray(plane.point, dtype=np.float64)
    denom = dirs @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (p0 @ n) / denom
    t = np.where(np.abs(denom) < _EPS, np.inf, t)
    return np.where(t > 0, t, np.inf)


def _box_t(dirs: np.ndarray, box: Box) -> np.ndarray:
    lo = np.asarray(box.lo, dtype=np.float64)
    hi = np.asarray(box.hi, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = lo / dirs
        t2 = hi / dirs
    # rays parallel to a slab: inside -> unconstrained, outside -> miss
    parallel = np.abs(dirs) < _EPS
    inside = (lo <= 0) & (0 <= hi)
    t1 = np.where(parallel, np.where(inside, -np.inf, np.inf), t1)
    t2 = np.where(parallel, np.where(inside, np.inf, -np.inf), t2)
    t_near = np.minimum(t1, t2).max(axis=-1)
    t_far = np.maximum(t1, t2).min(axis=-1)
    hit = (t_far >= t_near) & (t_far > 0)
    t = np.where(t_near > 0, t_near, t_far)
    return np.where(hit & (t > 0), t, np.inf)


def _quadratic_smallest_positive(a, b, c) -> np.ndarray:
    disc = b * b - 4 * a * c
    ok = (disc >= 0) & (a > _EPS)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (-b - sq) / (2 * a)
        t1 = (-b + sq) / (2 * a)
    t0 = np.where(ok & (t0 > 0), t0, np.inf)
    t1 = np.where(ok & (t1 > 0), t1, np.inf)
    return np.minimum(t0, t1)


def _sphere_t(dirs: np.ndarray, center, radius: float) -> np.ndarray:
    c = np.asarray(center, dtype=np.float64)
    a = np.einsum("...i,...i->...", dirs, dirs)
    b = -2.0 * (dirs @ c)
    cc = float(c @ c - radius * radius)
    return _quadratic_smallest_positive(a, b, cc)


def _capsule_t(dirs: np.ndarray, cap: Capsule) -> np.ndarray:
    a_pt = np.asarray(cap.a, dtype=np.float64)
    b_pt = np.asarray(cap.b, dtype=np.float64)
    axis = b_pt - a_pt
    length = np.linalg.norm(axis)
    if length < _EPS:
        return _sphere_t(dirs, a_pt, cap.radius)
    m = axis / length

    # infinite cylinder around the axis
    d_perp = dirs - np.einsum("...i,i->...", dirs, m)[..., None] * m
    o = -a_pt
    o_perp = o - (o @ m) * m
    qa = np.einsum("...i,...i->...", d_perp, d_perp)
    qb = 2.0 * np.einsum("...i,i->...", d_perp, o_perp)
    qc = float(o_perp @ o_perp - cap.radius * cap.radius)
    t_cyl = _quadratic_smallest_positive(qa, qb, qc)

    # keep cylinder hits between the caps
    with np.errstate(invalid="ignore"):
        s = (t_cyl[..., None] * dirs - a_pt) @ m
        t_cyl = np.where(np.isfinite(t_cyl) & (s >= 0) & (s <= length), t_cyl, np.inf)

    t = np.minimum(t_cyl, _sphere_t(dirs, a_pt, cap.radius))
    return np.minimum(t, _sphere_t(dirs, b_pt, cap.radius))


def render(
    primitives: list, k: CameraIntrinsics, t_max: float = 100.0
) -> tuple[np.ndarray, np.ndarray]:
    """Cast one ray per pixel and return (depth, hit_class) grids.

    Pixels whose rays escape the scene get NaN depth and HIT_NONE class.
    """
    dirs = ray_directions(k)
    depth = np.full((k.height, k.width), np.inf)
    hit_class = np.full((k.height, k.width), HIT_NONE, dtype=np.int8)

    for prim in primitives:
        if isinstance(prim, Plane):
            t = _plane_t(dirs, prim)
        elif isinstance(prim, Box):
            t = _box_t(dirs, prim)
        elif isinstance(prim, Sphere):
            t = _sphere_t(dirs, prim.center, prim.radius)
        elif isinstance(prim, Capsule):
            t = _capsule_t(dirs, prim)
        else:
            raise TypeError(f"unknown primitive {type(prim).__name__}")
        closer = t < depth
        depth[closer] = t[closer]
        hit_class[closer] = prim.hit_class

    depth[(depth > t_max) | ~np.isfinite(depth)] = np.nan
    hit_class[~np.isfinite(depth)] = HIT_NONE
    return depth, hit_class
