"""Instantaneous camera-motion model: per-pixel optical flow from egomotion.

Pixel convention used everywhere in this package: x grows right, y grows
down, origin at the top-left pixel center, pixel centers at integer
coordinates.

The flow at a pixel is linear in the rotation and in (inverse depth x
translation):

    u = Q_omega @ omega + d * Q_t @ t

where Q_omega and Q_t depend only on the centered pixel coordinates and the
focal length.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CameraIntrinsics",
    "EgoMotion",
    "InverseDepthMap",
    "FlowField",
    "centered_coords",
    "q_omega",
    "q_t",
    "pixel_flow",
    "flow_field",
]

# Documented validity envelope for the motion model (used for warnings only).
MAX_TZ_METERS = 7.0
MAX_OMEGA_Y_RAD = np.deg2rad(22.0)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with zero skew and unit aspect ratio."""

    f: float
    x0: float
    y0: float

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError(f"focal length must be positive, got {self.f}")

    def scaled(self, sx: float, sy: float) -> "CameraIntrinsics":
        """Intrinsics after resizing the image by (sx, sy).

        The unit-aspect-ratio model only supports uniform scaling.
        """
        if abs(sx - sy) > 1e-12:
            raise ValueError(
                f"anisotropic rescale ({sx} vs {sy}) breaks the unit aspect ratio"
            )
        return CameraIntrinsics(self.f * sx, self.x0 * sx, self.y0 * sy)


@dataclass(frozen=True)
class EgoMotion:
    """6-DoF control variable: rotation vector (radians) and translation (meters)."""

    omega: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=np.float64))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64))
        if self.omega.shape != (3,) or self.t.shape != (3,):
            raise ValueError("omega and t must be 3-vectors")
        if not (np.isfinite(self.omega).all() and np.isfinite(self.t).all()):
            raise ValueError("egomotion components must be finite")

    @classmethod
    def zero(cls) -> "EgoMotion":
        return cls(np.zeros(3), np.zeros(3))

    def within_envelope(self) -> bool:
        """Whether the motion stays inside the documented validity envelope."""
        return (
            abs(self.t[2]) <= MAX_TZ_METERS
            and abs(self.omega[1]) <= MAX_OMEGA_Y_RAD
        )


@dataclass(frozen=True)
class InverseDepthMap:
    """Per-pixel normalized inverse depth in [-1, 1] with an explicit validity mask."""

    values: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("inverse depth values must be a HxW array")
        mask = self.mask
        if mask is None:
            mask = np.ones(values.shape, dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != values.shape:
            raise ValueError(
                f"mask shape {mask.shape} does not match values shape {values.shape}"
            )
        valid = values[mask]
        if valid.size and not np.isfinite(valid).all():
            raise ValueError("valid inverse depth values must be finite")
        if valid.size and (np.abs(valid) > 1.0 + 1e-12).any():
            raise ValueError("valid inverse depth values must lie in [-1, 1]")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FlowField:
    """Per-pixel 2-vector displacement in pixels; `valid` is False where the
    translational component could not be computed (missing depth)."""

    u: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if u.ndim != 3 or u.shape[2] != 2:
            raise ValueError("flow must have shape (H, W, 2)")
        if valid.shape != u.shape[:2]:
            raise ValueError("valid mask shape does not match flow shape")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]


def centered_coords(x, y, k: CameraIntrinsics):
    """Shift pixel coordinates to the principal point."""
    return x - k.x0, y - k.y0


def q_omega(xt, yt, f):
    """Rotational flow matrix at centered coordinates (xt, yt).

    Rows give the x- and y-flow per unit rotation rate about each axis.
    """
    xt = np.asarray(xt, dtype=np.float64)
    yt = np.asarray(yt, dtype=np.float64)
    row_x = np.stack([xt * yt / f, -f - xt * xt / f, yt], axis=-1)
    row_y = np.stack([f + yt * yt / f, -xt * yt / f, -xt], axis=-1)
    return np.stack([row_x, row_y], axis=-2)


def q_t(xt, yt, f):
    """Translational flow matrix (per unit inverse depth) at (xt, yt)."""
    xt = np.asarray(xt, dtype=np.float64)
    yt = np.asarray(yt, dtype=np.float64)
    z = np.zeros_like(xt)
    fm = np.broadcast_to(np.float64(f), xt.shape)
    row_x = np.stack([-fm, z, xt], axis=-1)
    row_y = np.stack([z, -fm, yt], axis=-1)
    return np.stack([row_x, row_y], axis=-2)


def pixel_flow(x, y, d, m: EgoMotion, k: CameraIntrinsics):
    """Flow of a single pixel with inverse depth d under egomotion m."""
    xt, yt = centered_coords(x, y, k)
    qo = q_omega(xt, yt, k.f)
    qt = q_t(xt, yt, k.f)
    return qo @ m.omega + d * (qt @ m.t)


def flow_field(depth: InverseDepthMap, m: EgoMotion, k: CameraIntrinsics) -> FlowField:
    """Vectorized pixel_flow over a whole inverse-depth map.

    Pixels with invalid depth still carry the rotational flow component (it
    is depth-free); their translational part is dropped and they are flagged
    invalid in the result.
    """
    h, w = depth.height, depth.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    xt, yt = centered_coords(xs, ys, k)

    qo = q_omega(xt, yt, k.f)  # (H, W, 2, 3)
    qt = q_t(xt, yt, k.f)

    rot = qo @ m.omega
    trans = qt @ m.t
    d = np.where(depth.mask, depth.values, 0.0)
    u = rot + d[..., None] * trans
    return FlowField(u=u, valid=depth.mask.copy())
