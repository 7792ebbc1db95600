"""Exact pinhole reprojection under a rigid transform.

This is the brute-force geometric backend: back-project each pixel with its
metric depth, move the point with a full rigid transform, and re-project.
It serves both as the oracle for the first-order motion model in
:mod:`viewwarp.geometry` and as the forward-warping (splatting) renderer.

Euler convention, fixed package-wide: extrinsic X-Y-Z, i.e.
``R = R_z(wz) @ R_y(wy) @ R_x(wx)``. Pose ingestion must match.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import CameraIntrinsics, EgoMotion, FlowField
from .errors import DegeneracyError

__all__ = [
    "RigidTransform",
    "SyntheticScene",
    "euler_to_rotation",
    "rotation_to_euler",
    "motion_point_transform",
    "exact_reproject",
    "exact_flow_field",
    "forward_warp",
    "render_synthetic",
]

_ORTHO_TOL = 1e-9
# Depths closer than this are a z-buffer tie, resolved by source pixel order.
_ZBUF_TIE = 1e-9


@dataclass(frozen=True)
class RigidTransform:
    """Point transform P' = rotation @ P + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if np.abs(r.T @ r - np.eye(3)).max() > _ORTHO_TOL:
            raise ValueError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation matrix must have determinant +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self . other)(P) = self(other(P))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


@dataclass(frozen=True)
class SyntheticScene:
    """Checkerboard-textured test scene with exact analytic depth."""

    kind: str  # "plane" | "tilted" | "ramp"
    depth: float = 10.0          # plane: constant depth
    normal: tuple = (0.0, 0.0, 1.0)  # tilted: plane normal (camera frame)
    offset: float = 10.0         # tilted: plane equation normal . P = offset
    near: float = 5.0            # ramp: depth of the top row
    far: float = 20.0            # ramp: depth of the bottom row

    @classmethod
    def plane(cls, depth: float) -> "SyntheticScene":
        return cls(kind="plane", depth=depth)

    @classmethod
    def tilted(cls, normal, offset: float) -> "SyntheticScene":
        return cls(kind="tilted", normal=tuple(normal), offset=offset)

    @classmethod
    def ramp(cls, near: float, far: float) -> "SyntheticScene":
        return cls(kind="ramp", near=near, far=far)


class Reprojection(NamedTuple):
    x: float
    y: float
    depth: float
    behind: bool


def euler_to_rotation(omega) -> np.ndarray:
    """Rotation matrix from Euler angles, extrinsic X-Y-Z order."""
    wx, wy, wz = np.asarray(omega, dtype=np.float64)
    cx, sx = np.cos(wx), np.sin(wx)
    cy, sy = np.cos(wy), np.sin(wy)
    cz, sz = np.cos(wz), np.sin(wz)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


def rotation_to_euler(r: np.ndarray, gimbal_tol: float = 1e-6) -> np.ndarray:
    """Inverse of euler_to_rotation. Raises near the wy = +-pi/2 singularity."""
    r = np.asarray(r, dtype=np.float64)
    sy = -r[2, 0]
    sy_clipped = np.clip(sy, -1.0, 1.0)
    wy = np.arcsin(sy_clipped)
    if abs(abs(wy) - np.pi / 2) < gimbal_tol:
        raise DegeneracyError(
            f"Euler extraction degenerate: wy = {wy:.9f} is within "
            f"{gimbal_tol} of +-pi/2 (gimbal lock)"
        )
    wx = np.arctan2(r[2, 1], r[2, 2])
    wz = np.arctan2(r[1, 0], r[0, 0])
    return np.array([wx, wy, wz])


def motion_point_transform(m: EgoMotion) -> RigidTransform:
    """Point transform into the moved camera's frame for egomotion m.

    The camera pose after the motion is (R, t) in the original frame, so
    points transform by the inverse: P' = R^T (P - t). To first order this
    gives dP = -omega x P - t, matching the instantaneous flow model.
    """
    r = euler_to_rotation(m.omega)
    return RigidTransform(r.T, -r.T @ m.t)


def _backproject(x, y, depth, k: CameraIntrinsics):
    xt = (np.asarray(x, dtype=np.float64) - k.x0) / k.f
    yt = (np.asarray(y, dtype=np.float64) - k.y0) / k.f
    z = np.asarray(depth, dtype=np.float64)
    return np.stack([xt * z, yt * z, z], axis=-1)


def exact_reproject(x, y, depth, transform: RigidTransform, k: CameraIntrinsics):
    """Back-project (x, y, depth), apply the transform, re-project.

    Returns a Reprojection; `behind` is True when the moved point has
    non-positive depth (the projected coordinates are then meaningless).
    """
    if np.any(np.asarray(depth) <= 0):
        raise ValueError("depth must be positive")
    p = _backproject(x, y, depth, k)
    p2 = p @ transform.rotation.T + transform.translation
    z2 = p2[..., 2]
    behind = z2 <= 0
    safe_z = np.where(behind, 1.0, z2)
    x2 = k.f * p2[..., 0] / safe_z + k.x0
    y2 = k.f * p2[..., 1] / safe_z + k.y0
    if np.ndim(x2) == 0:
        return Reprojection(float(x2), float(y2), float(z2), bool(behind))
    return Reprojection(x2, y2, z2, behind)


def exact_flow_field(depth_map, transform: RigidTransform, k: CameraIntrinsics) -> FlowField:
    """Per-pixel exact reprojection minus the source coordinate."""
    depth_map = np.asarray(depth_map, dtype=np.float64)
    h, w = depth_map.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    rp = exact_reproject(xs, ys, depth_map, transform, k)
    u = np.stack([rp.x - xs, rp.y - ys], axis=-1)
    u = np.where(rp.behind[..., None], 0.0, u)
    return FlowField(u=u, valid=~rp.behind)


def forward_warp(image, depth_map, transform: RigidTransform, k: CameraIntrinsics):
    """Splat each source pixel to its reprojected location with z-buffering.

    Nearest-pixel splatting, no blending: a purely geometric baseline whose
    uncovered target pixels come back as holes. Depths equal within
    1e-9 tie-break to the lexicographically smallest (row, col) source pixel.

    Returns (warped image, hole mask) where hole_mask is True at target
    pixels that received no splat.
    """
    image = np.asarray(image)
    depth_map = np.asarray(depth_map, dtype=np.float64)
    if image.shape[:2] != depth_map.shape:
        raise ValueError(
            f"image {image.shape[:2]} and depth {depth_map.shape} sizes differ"
        )
    h, w = depth_map.shape
    ys, xs = np.mgrid[0:h, 0:w]
    x2, y2, z2, behind = exact_reproject(
        xs.astype(np.float64), ys.astype(np.float64), depth_map, transform, k
    )
    tx = np.rint(x2).astype(np.int64)
    ty = np.rint(y2).astype(np.int64)
    ok = (~behind) & (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)

    src = np.flatnonzero(ok.ravel())
    target = (ty.ravel()[src] * w + tx.ravel()[src]).astype(np.int64)
    depth_bin = np.round(z2.ravel()[src] / _ZBUF_TIE).astype(np.int64)
    # lexsort: last key is primary -> target, then quantized depth, then
    # source order (already ascending = lexicographic (row, col)).
    order = np.lexsort((src, depth_bin, target))
    target_sorted = target[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = target_sorted[1:] != target_sorted[:-1]
    winners_src = src[order][first]
    winners_tgt = target_sorted[first]

    out = np.zeros_like(image)
    flat_out = out.reshape(h * w, -1)
    flat_in = image.reshape(h * w, -1)
    flat_out[winners_tgt] = flat_in[winners_src]
    hole = np.ones(h * w, dtype=bool)
    hole[winners_tgt] = False
    return out, hole.reshape(h, w)


def render_synthetic(scene: SyntheticScene, k: CameraIntrinsics, size, square: int = 8):
    """Deterministic checkerboard render with exact per-pixel depth.

    size is (H, W). Returns (image in [0, 1] with shape (H, W, 3), depth map
    in meters). The checker pattern is tinted differently per channel so
    channel mix-ups show up in tests.
    """
    h, w = size
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)

    if scene.kind == "plane":
        if scene.depth <= 0:
            raise ValueError("plane depth must be positive")
        depth = np.full((h, w), float(scene.depth))
    elif scene.kind == "tilted":
        n = np.asarray(scene.normal, dtype=np.float64)
        n = n / np.linalg.norm(n)
        # ray direction per pixel; depth solves normal . (Z * dir) = offset
        dirs = np.stack(
            [(xs - k.x0) / k.f, (ys - k.y0) / k.f, np.ones_like(xs)], axis=-1
        )
        denom = dirs @ n
        if np.any(denom <= 1e-9):
            raise ValueError("tilted plane not fully in front of the camera")
        depth = scene.offset / denom
        if np.any(depth <= 0):
            raise ValueError("tilted plane produces non-positive depths")
    elif scene.kind == "ramp":
        if scene.near <= 0 or scene.far <= 0:
            raise ValueError("ramp depths must be positive")
        rows = np.linspace(scene.near, scene.far, h)
        depth = np.repeat(rows[:, None], w, axis=1)
    else:
        raise ValueError(f"unknown scene kind: {scene.kind!r}")

    checker = ((xs // square).astype(int) + (ys // square).astype(int)) % 2
    image = np.empty((h, w, 3), dtype=np.float64)
    image[..., 0] = np.where(checker == 0, 0.85, 0.15)
    image[..., 1] = np.where(checker == 0, 0.65, 0.35)
    image[..., 2] = np.where(checker == 0, 0.25, 0.75)
    return image, depth
