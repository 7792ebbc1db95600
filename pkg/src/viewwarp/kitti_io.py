"""KITTI-style depth and pose ingestion with the exact preprocessing used
downstream.

External formats:
  * depth: 16-bit single-channel PNG, stored_value / 256 = meters, 0 invalid
  * poses: text, one pose per line, 12 whitespace-separated floats forming a
    row-major 3x4 camera-to-world matrix
"""

from dataclasses import dataclass

import cv2
import numpy as np
from scipy.spatial import cKDTree

from .errors import DataFormatError
from .geometry import CameraIntrinsics, EgoMotion
from .reproject import RigidTransform, rotation_to_euler

__all__ = [
    "PoseRecord",
    "DepthImage",
    "load_depth_png",
    "write_depth_png",
    "normalize_inverse_depth",
    "load_odometry_poses",
    "relative_motion",
    "resize_to",
    "scale_intrinsics_for_resize",
    "densify_depth",
]

# The normalization 2/(x - 1.5) - 1 diverges at 1.5 m; shallower depths are
# flagged invalid, never clamped from the wrong side.
DEPTH_SINGULARITY_M = 1.5


@dataclass(frozen=True)
class PoseRecord:
    """Camera-to-world pose as a row-major 3x4 (rotation | translation)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 4):
            raise ValueError(f"pose must be 3x4, got {m.shape}")
        r = m[:, :3]
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-6:
            raise ValueError("pose rotation block is not orthonormal")
        object.__setattr__(self, "matrix", m)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:, 3]


@dataclass(frozen=True)
class DepthImage:
    """Metric depth in meters; 0 marks invalid pixels."""

    depth: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError("depth must be a HxW array")
        if (d < 0).any():
            raise ValueError("depth values must be non-negative (0 = invalid)")
        object.__setattr__(self, "depth", d)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return self.depth > 0


def load_depth_png(path) -> DepthImage:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataFormatError(f"cannot read depth PNG: {path}")
    if raw.dtype != np.uint16 or raw.ndim != 2:
        raise DataFormatError(
            f"{path}: expected 16-bit single-channel PNG, got dtype={raw.dtype} "
            f"shape={raw.shape}"
        )
    return DepthImage(depth=raw.astype(np.float64) / 256.0)


def write_depth_png(path, depth: DepthImage) -> None:
    stored = np.round(depth.depth * 256.0)
    if (stored > np.iinfo(np.uint16).max).any():
        raise ValueError("depth too large for 16-bit storage")
    if not cv2.imwrite(str(path), stored.astype(np.uint16)):
        raise DataFormatError(f"cannot write depth PNG: {path}")


def normalize_inverse_depth(x):
    """Normalized inverse depth 2/(x - 1.5) - 1, clamped into [-1, 1].

    Returns (values, valid); depths at or below the 1.5 m singularity are
    invalid.
    """
    x = np.asarray(x, dtype=np.float64)
    valid = x > DEPTH_SINGULARITY_M
    safe = np.where(valid, x, DEPTH_SINGULARITY_M + 1.0)
    values = np.clip(2.0 / (safe - DEPTH_SINGULARITY_M) - 1.0, -1.0, 1.0)
    values = np.where(valid, values, 0.0)
    if x.ndim == 0:
        return float(values), bool(valid)
    return values, valid


def load_odometry_poses(path):
    """Parse a KITTI odometry pose file into a list of PoseRecords."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 12:
                raise DataFormatError(
                    f"{path}:{lineno}: expected 12 values, got {len(parts)}"
                )
            try:
                vals = np.array([float(p) for p in parts])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
            records.append(PoseRecord(matrix=vals.reshape(3, 4)))
    return records


def relative_motion(pose_i: PoseRecord, pose_j: PoseRecord) -> EgoMotion:
    """Egomotion taking view i to view j (camera-to-world records).

    The relative transform is pose_i^-1 . pose_j, i.e. camera j's pose
    expressed in camera i's frame; rotation is reduced to Euler angles under
    the package's fixed extrinsic X-Y-Z convention.
    """
    ri, ti = pose_i.rotation, pose_i.translation
    rj, tj = pose_j.rotation, pose_j.translation
    r_rel = ri.T @ rj
    t_rel = ri.T @ (tj - ti)
    omega = rotation_to_euler(r_rel)  # raises DegeneracyError near gimbal lock
    return EgoMotion(omega=omega, t=t_rel)


def resize_to(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize to (height, width)."""
    image = np.asarray(image)
    if image.shape[0] < 2 or image.shape[1] < 2:
        raise ValueError("input too small to resize")
    if height < 2 or width < 2:
        raise ValueError(f"degenerate target size {height}x{width}")
    if (height, width) == image.shape[:2]:
        return image.copy()
    return cv2.resize(image, (width, height), interpolation=cv2.INTER_LINEAR)


def scale_intrinsics_for_resize(
    k: CameraIntrinsics, src_hw, dst_hw
) -> CameraIntrinsics:
    sy = dst_hw[0] / src_hw[0]
    sx = dst_hw[1] / src_hw[1]
    return k.scaled(sx, sy)


def densify_depth(sparse: DepthImage) -> DepthImage:
    """Fill invalid pixels with the nearest valid pixel's depth.

    Euclidean distance; ties resolve to the smallest row, then column.
    Valid pixels pass through unchanged.
    """
    valid = sparse.valid
    if not valid.any():
        raise ValueError("densify_depth needs at least one valid pixel")
    if valid.all():
        return DepthImage(depth=sparse.depth.copy())

    vr, vc = np.nonzero(valid)  # nonzero yields (row, col) lexicographic order
    pts = np.stack([vr, vc], axis=-1)
    tree = cKDTree(pts)
    hr, hc = np.nonzero(~valid)
    query = np.stack([hr, hc], axis=-1)
    dist, idx = tree.query(query)

    # resolve exact-distance ties lexicographically using integer distances
    d2 = np.round(dist * dist).astype(np.int64)
    out = sparse.depth.copy()
    for qi, (r, c) in enumerate(query):
        cands = tree.query_ball_point((r, c), np.sqrt(d2[qi]) + 1e-9)
        best = min(
            (cc for cc in cands
             if (pts[cc, 0] - r) ** 2 + (pts[cc, 1] - c) ** 2 == d2[qi]),
            default=idx[qi],
        )
        out[r, c] = sparse.depth[pts[best, 0], pts[best, 1]]
    return DepthImage(depth=out)
